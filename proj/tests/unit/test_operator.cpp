#include <doctest.h>

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "specid/error.hpp"
#include "specid/operator.hpp"

using namespace specid;

namespace {

const double kPi = std::numbers::pi;

Eigen::MatrixXd random_symmetric(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) m(i, j) = m(j, i) = nd(rng);
    return m;
}

Eigen::VectorXd random_unit(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    Eigen::VectorXd f(n);
    for (int i = 0; i < n; ++i) f[i] = nd(rng);
    return f.normalized();
}

OperatorModel diag123() {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 3);
    m.diagonal() << 1, 2, 3;
    return OperatorModel::dense(m);
}

}  // namespace

TEST_SUITE("operator") {

TEST_CASE("construction enforces symmetry and shapes") {
    Eigen::MatrixXd m(2, 2);
    m << 0, 1, 1 + 1e-16, 0;
    CHECK_NOTHROW(OperatorModel::dense(m));  // 1 + 1e-16 rounds to 1
    m(1, 0) = 1.0 + 1e-15;
    CHECK_THROWS_AS(OperatorModel::dense(m), ValidationError);
    CHECK_THROWS_AS(OperatorModel::dense(Eigen::MatrixXd(2, 3)), ValidationError);
    CHECK_THROWS_AS(OperatorModel::tridiagonal({1, 2}, {1, 1}), ValidationError);
    CHECK(free_jacobi(5).dim() == 5);
    CHECK(analytic_model("free_jacobi_halfline").dim() == 0);
    CHECK_THROWS_AS(analytic_model("anderson"), ValidationError);
}

TEST_CASE("spectral measure examples") {
    Eigen::MatrixXd swap(2, 2);
    swap << 0, 1, 1, 0;
    const auto r = spectral_measure(OperatorModel::dense(swap), Eigen::Vector2d(1, 0));
    REQUIRE(r.measure.atoms().size() == 2);
    CHECK(r.measure.atoms()[0].position == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(r.measure.atoms()[0].weight == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(r.measure.atoms()[1].position == doctest::Approx(1.0).epsilon(1e-15));

    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(3, 3);
    d.diagonal() << 2, 5, 7;
    const auto s = spectral_measure(OperatorModel::dense(d), Eigen::Vector3d(0, 1, 0));
    REQUIRE(s.measure.atoms().size() == 1);
    CHECK(s.measure.atoms()[0].position == 5.0);
    CHECK(s.measure.atoms()[0].weight == doctest::Approx(1.0).epsilon(1e-15));

    CHECK_THROWS_AS(spectral_measure(OperatorModel::dense(d), Eigen::Vector3d(0, 1, 1)), ValidationError);
    CHECK_THROWS_AS(spectral_measure(OperatorModel::dense(d), Eigen::Vector2d(1, 0)), ValidationError);
}

TEST_CASE("degenerate eigenvalues are merged") {
    Eigen::MatrixXd d = Eigen::MatrixXd::Identity(4, 4);
    d(3, 3) = 2.0;
    const auto s = spectral_measure(OperatorModel::dense(d), Eigen::Vector4d(0.5, 0.5, 0.5, 0.5));
    REQUIRE(s.measure.atoms().size() == 2);
    CHECK(s.measure.atoms()[0].weight == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("free Jacobi eigenpairs have closed forms") {
    for (int n : {200, 400}) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto r = spectral_measure(free_jacobi(n), Eigen::VectorXd::Unit(n, 0));
        CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 5.0);
        REQUIRE(r.measure.atoms().size() == static_cast<std::size_t>(n));
        CHECK(r.eigen_residual <= 2e-10);
        for (int k = 1; k <= n; ++k) {
            // atoms ascend; lambda_k = 2 cos(k pi/(n+1)) descends in k
            const auto& at = r.measure.atoms()[n - k];
            const double th = k * kPi / (n + 1);
            CHECK(std::abs(at.position - 2 * std::cos(th)) <= 1e-10);
            CHECK(std::abs(at.weight - 2.0 / (n + 1) * std::sin(th) * std::sin(th)) <= 1e-10);
        }
    }
}

TEST_CASE("free Jacobi spectral cdf approaches the semicircle") {
    for (auto [n, tol] : {std::pair{200, 0.02}, std::pair{400, 0.01}}) {
        const auto mu = spectral_measure(free_jacobi(n), Eigen::VectorXd::Unit(n, 0)).measure;
        double worst = 0.0;
        for (const auto& at : mu.atoms())
            for (double y : {at.position - 1e-12, at.position})
                worst = std::max(worst, std::abs(mu.cdf(y) - oracle::semicircle_cdf(y)));
        CHECK(worst <= tol);
        if (n == 200) {
            const double finite = mu.interval_mass(-1.0, 1.0, Ends::closed());
            CHECK(std::abs(finite - (oracle::semicircle_cdf(1.0) - oracle::semicircle_cdf(-1.0))) <= 0.02);
        }
    }
}

TEST_CASE("analytic model") {
    const auto A = analytic_model("free_jacobi_halfline");
    const auto& mu = A.analytic_measure();
    CHECK(mu.total_mass() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(mu.ac_pieces()[0].density(0.0) == doctest::Approx(1 / kPi).epsilon(1e-14));
    CHECK(oracle::singular([&](double x) { return mu.ac_pieces()[0].density(x); }, -2, 2) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(spectral_measure_of(A, Eigen::Vector2d(0, 1)), ValidationError);
    CHECK_NOTHROW(spectral_measure_of(A, Eigen::VectorXd()));
}

TEST_CASE("expectation transform examples") {
    Eigen::MatrixXd swap(2, 2);
    swap << 0, 1, 1, 0;
    const auto A = OperatorModel::dense(swap);
    CHECK(expectation_transform(A, Eigen::Vector2d(1, 0), gauss_kernel(), 1.0, 0.01, false) ==
          doctest::Approx(0.5 + 0.5 * std::exp(-40000.0)).epsilon(1e-15));
    std::mt19937_64 rng(21);
    for (int t = 0; t < 5; ++t) {
        const auto M = OperatorModel::dense(random_symmetric(12, rng));
        const auto f = random_unit(12, rng);
        const auto es = eigensystem(M);
        const double lam = es.values.maxCoeff() + 3.0;
        for (double a : {0.03, 0.01}) {
            for (const auto& k : {gauss_kernel(), cauchy_kernel()})
                CHECK(std::abs(expectation_transform(es, f, k, lam, a, false)) <=
                      k.decay_const * std::pow(a / 3.0, k.delta));
        }
    }
}

TEST_CASE("functional calculus equals the transform of the spectral measure") {
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<int> dims(1, 64);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const auto k = gauss_kernel();
    for (int t = 0; t < 50; ++t) {
        const int n = dims(rng);
        const auto M = OperatorModel::dense(random_symmetric(n, rng));
        const auto f = random_unit(n, rng);
        const auto es = eigensystem(M);
        const auto mu = spectral_measure(es, f).measure;
        const double lam = es.norm * u(rng);
        const double a = std::pow(10.0, -3.0 * (u(rng) + 1.0));
        const bool scaled = t % 2 == 0;
        const double lhs = expectation_transform(es, f, k, lam, a, scaled);
        const double rhs = conv(mu, k, a, lam, scaled).value;
        INFO("dim " << n << " a " << a);
        CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));
    }
}

TEST_CASE("spectral weights sum to one") {
    std::mt19937_64 rng(9);
    for (int n : {7, 64, 256}) {
        const auto M = OperatorModel::dense(random_symmetric(n, rng));
        const auto f = random_unit(n, rng);
        const auto r = spectral_measure(M, f);
        CHECK(std::abs(r.measure.total_mass() - 1.0) <= 1e-10);
        CHECK(r.eigen_residual <= 1e-10 * eigensystem(M).norm);
    }
}

TEST_CASE("trace is basis independent") {
    std::mt19937_64 rng(10);
    const int n = 24;
    const auto M = OperatorModel::dense(random_symmetric(n, rng));
    const auto es = eigensystem(M);
    const auto k = cauchy_kernel();
    for (double lam : {-2.0, 0.0, 3.5}) {
        double by_basis = 0.0;
        for (int i = 0; i < n; ++i) by_basis += expectation_transform(es, Eigen::VectorXd::Unit(n, i), k, lam, 0.2, false);
        double by_spectrum = 0.0;
        for (int i = 0; i < n; ++i) by_spectrum += k.psi((es.values[i] - lam) / 0.2);
        CHECK(std::abs(by_basis - by_spectrum) <= 1e-10);
    }
}

TEST_CASE("point spectrum test") {
    const auto g = ScaleGrid::point_default();
    const Eigen::Vector3d f = Eigen::Vector3d::Ones().normalized();
    const auto at2 = point_spectrum_test(diag123(), f, 2.0, gauss_kernel(), g);
    CHECK(*at2.extrapolated == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(indicates_point_spectrum(at2));
    const auto gap = point_spectrum_test(diag123(), f, 2.5, gauss_kernel(), g);
    CHECK(std::abs(*gap.extrapolated) <= 1e-12);
    CHECK_FALSE(indicates_point_spectrum(gap));

    const int n = 200;
    const double lam1 = 2 * std::cos(kPi / (n + 1));
    const double w1 = 2.0 / (n + 1) * std::pow(std::sin(kPi / (n + 1)), 2);
    CHECK(w1 == doctest::Approx(2.43e-6).epsilon(1e-2));
    const auto e = point_spectrum_test(free_jacobi(n), Eigen::VectorXd::Unit(n, 0), lam1, gauss_kernel(), g);
    CHECK(std::abs(*e.extrapolated - w1) <= 1e-10);
    CHECK(indicates_point_spectrum(e, 1e-7));

    const auto zero = point_spectrum_test(free_jacobi(n), Eigen::VectorXd::Unit(n, 0), 0.0, gauss_kernel(), g);
    CHECK(std::abs(*zero.extrapolated) <= 1e-12);
    CHECK(zero.notes.find("gap warning") != std::string::npos);
}

TEST_CASE("ac overlap test") {
    const auto g = ScaleGrid::point_default();
    const auto k = gauss_kernel();
    const auto sc = ac_overlap_test(analytic_model("free_jacobi_halfline"), {}, -1.0, 1.0, k, g, 10);
    CHECK(sc.fraction == 1.0);
    CHECK(sc.overlap);
    for (std::size_t i = 0; i < sc.lambdas.size(); ++i)
        CHECK(*sc.limits[i].extrapolated ==
              doctest::Approx(k.a_psi * oracle::semicircle_density(sc.lambdas[i])).epsilon(1e-6));
    const Eigen::Vector3d f = Eigen::Vector3d::Ones().normalized();
    const auto pp = ac_overlap_test(diag123(), f, 1.2, 1.8, k, g, 10);
    CHECK(pp.fraction == 0.0);
    CHECK_FALSE(pp.overlap);
    const auto cantor = ac_overlap_test(analytic_model("cantor"), {}, 0.0, 1.0, k, g, 10);
    CHECK(cantor.fraction == 0.0);
    CHECK_FALSE(cantor.overlap);
}

TEST_CASE("interval tests over the standard basis") {
    const auto g = ScaleGrid::interval_default();
    const auto k = gauss_kernel();
    const auto none = interval_tests(diag123(), 1.4, 1.6, k, 0.5, g);
    CHECK(none.pp.size() == 3);
    CHECK(none.pp_empty);
    CHECK(none.ac_empty);
    for (const auto& e : none.pp) CHECK(*e.extrapolated == 0.0);

    const auto some = interval_tests(diag123(), 0.5, 2.5, k, 0.5, g);
    CHECK_FALSE(some.pp_empty);
    CHECK(some.ac_empty);
    CHECK(*some.pp[0].extrapolated == doctest::Approx(k.l2_norm_sq).epsilon(1e-6));
    CHECK(*some.pp[2].extrapolated == 0.0);

    const auto sc = interval_tests(analytic_model("free_jacobi_halfline"), -1.0, 1.0, k, 0.5, g);
    REQUIRE(sc.ac.size() == 1);
    const double ref =
        std::sqrt(k.a_psi) * oracle::finite([](double x) { return std::sqrt(oracle::semicircle_density(x)); }, -1, 1);
    CHECK(*sc.ac[0].extrapolated == doctest::Approx(ref).epsilon(1e-3));
    CHECK_FALSE(sc.ac_empty);
    CHECK(sc.pp_empty);
}

TEST_CASE("operator JSON specs") {
    using nlohmann::json;
    const auto t = operator_from_json(json::parse(R"({"kind":"tridiagonal","diag":[0,0,0],"offdiag":[1,1]})"));
    CHECK(t.kind() == OperatorModel::Kind::tridiagonal);
    const auto d = operator_from_json(json::parse(R"({"kind":"dense","rows":[[1,0],[0,2]]})"));
    CHECK(d.dim() == 2);
    CHECK(operator_from_json(json::parse(R"({"kind":"analytic","name":"free_jacobi_halfline"})")).finite() == false);
    CHECK_THROWS_AS(operator_from_json(json::parse(R"({"kind":"dense","rows":[[1,2],[3,4]]})")), ValidationError);
    CHECK_THROWS_AS(operator_from_json(json::parse(R"({"kind":"dense","rows":[[1]],"extra":1})")), ValidationError);
    CHECK_THROWS_AS(operator_from_json(json::parse(R"({"kind":"banded"})")), ValidationError);
    const auto f = vector_from_json(json::parse("[3,4]"), d);
    CHECK(f[0] == doctest::Approx(0.6));
    CHECK(f[1] == doctest::Approx(0.8));
    CHECK(vector_from_json(json("e2"), d)[1] == 1.0);
    CHECK_THROWS_AS(vector_from_json(json("e3"), d), ValidationError);
    CHECK_THROWS_AS(vector_from_json(json::parse("[0,0]"), d), ValidationError);
    CHECK(parse_vector("1,1", d).norm() == doctest::Approx(1.0));
}

}  // TEST_SUITE
