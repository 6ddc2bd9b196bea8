#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "specid/error.hpp"
#include "specid/transform.hpp"

using namespace specid;

namespace {

const double kPi = std::numbers::pi;
const double kCantorDim = std::log(2.0) / std::log(3.0);

std::vector<KernelSpec> kernels() { return {gauss_kernel(), cauchy_kernel(), power_kernel(2.5)}; }

// Same-route agreement allowing for the reported error estimates.
bool close(const TransformValue& u, const TransformValue& v, double rel) {
    return std::abs(u.value - v.value) <=
           rel * std::max(std::abs(u.value), std::abs(v.value)) + u.est_abs_error + v.est_abs_error + 1e-300;
}

}  // namespace

TEST_SUITE("transform") {

TEST_CASE("scale grid") {
    const auto g = ScaleGrid::point_default();
    const auto s = g.scales();
    REQUIRE(s.size() == 60);
    CHECK(s.front() == 1.0);
    for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i] < s[i - 1]);
    CHECK(g.a_min() >= kScaleFloor);
    CHECK(ScaleGrid::interval_default().a_min() == doctest::Approx(1e-2 * std::pow(0.5, 13)));
    CHECK_THROWS_AS((ScaleGrid{1.0, 0.5, 40}.validate()), ValidationError);
    CHECK_THROWS_AS((ScaleGrid{1.0, 1.0, 4}.validate()), ValidationError);
    CHECK_THROWS_AS((ScaleGrid{-1.0, 0.5, 4}.validate()), ValidationError);
    CHECK_THROWS_AS((ScaleGrid{1.0, 0.5, 0}.validate()), ValidationError);
}

TEST_CASE("conv examples") {
    for (const auto& k : kernels())
        for (double a : {1.0, 1e-3, 1e-9}) CHECK(conv(Measure::dirac(0.0), k, a, 0.0, false).value == 1.0);
    CHECK(conv(Measure::dirac(0.0), gauss_kernel(), 1.0, 1.0, false).value ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    // (1/a) int_0^1 dy / (1 + ((0.5-y)/a)^2) = 2 arctan(0.5/a)
    const auto v = conv(Measure::uniform(), cauchy_kernel(), 0.01, 0.5, true);
    CHECK(v.value == doctest::Approx(2 * std::atan(50.0)).epsilon(1e-12));
    CHECK(std::abs(v.value - kPi) > 0.013);
    CHECK(v.est_abs_error <= 1e-8 * std::max(1.0, v.value));
    CHECK_THROWS_AS(conv(Measure::uniform(), gauss_kernel(), 1e-10, 0.5, false), ValidationError);
}

TEST_CASE("conv on densities matches Boost quadrature") {
    const auto k = gauss_kernel();
    for (double a : {0.5, 0.05, 1e-3})
        for (double x : {-1.5, 0.0, 1.9, 2.05}) {
            const double ref = oracle::finite_split(
                [&](double y) { return k.psi((x - y) / a) * oracle::semicircle_density(y); }, -2, 2,
                {x - 40 * a, x, x + 40 * a});
            CHECK(conv(Measure::semicircle(), k, a, x, false).value == doctest::Approx(ref).epsilon(1e-9).scale(1e-14));
        }
    // Inverse square root singularity at the left end.
    const auto c = cauchy_kernel();
    for (double a : {0.3, 1e-3})
        for (double x : {0.0, 0.01, 0.6}) {
            const double ref = oracle::singular([&](double y) { return c.psi((x - y) / a) / (2 * std::sqrt(y)); }, 0, 1);
            CHECK(conv(Measure::sqrt_cdf(), c, a, x, false).value == doctest::Approx(ref).epsilon(1e-9));
        }
}

TEST_CASE("conv on the Cantor measure matches the cylinder expansion oracle") {
    // Generation-12 cylinders, each replaced by its mass at the midpoint
    // with the second-order correction psi'' * variance; fine enough for a
    // = 0.05 with gauss.
    const auto k = gauss_kernel();
    const double a = 0.05;
    for (double x : {0.1, 0.5, 0.8}) {
        const int gen = 12;
        const double w = std::pow(3.0, -gen);
        const double var = w * w / 8.0;  // Cantor variance scaled to the cylinder
        double s = 0.0;
        for (int i = 0; i < (1 << gen); ++i) {
            double left = 0.0;
            for (int b = gen - 1, p = 1; b >= 0; --b, ++p)
                if (i >> b & 1) left += 2.0 * std::pow(3.0, -p);
            const double u = (x - left - 0.5 * w) / a;
            const double d2 = (4 * u * u - 2) * std::exp(-u * u) / (a * a);
            s += std::pow(0.5, gen) * (k.psi(u) + 0.5 * d2 * var);
        }
        CHECK(conv(Measure::cantor(), k, a, x, false).value == doctest::Approx(s).epsilon(1e-10));
    }
}

TEST_CASE("conv_cdf_route examples") {
    CHECK(conv_cdf_route(Measure::dirac(0.0), gauss_kernel(), 1.0, 0.0, 1.0).value ==
          doctest::Approx(1.0).epsilon(1e-12));
    const auto c = conv_cdf_route(Measure::cantor(), gauss_kernel(), 1e-6, 0.0, kCantorDim);
    CHECK(c.value >= 0.3);
    CHECK(c.value <= 3.5);
    const auto d = conv(Measure::cantor(), gauss_kernel(), 1e-6, 0.0, false);
    CHECK(c.value == doctest::Approx(d.value * std::pow(1e-6, -kCantorDim)).epsilon(1e-6));
    for (const auto& k : kernels())
        for (double a : {0.1, 1e-3, 1e-6}) {
            INFO(k.name << " a=" << a);
            // int_{-0.5/a}^{0.5/a} psi, the truncated A_psi
            const double ref = oracle::finite_split(k.psi, -0.5 / a, 0.5 / a, {-10.0, 0.0, 10.0});
            CHECK(conv_cdf_route(Measure::uniform(), k, a, 0.5, 1.0).value == doctest::Approx(ref).epsilon(1e-6));
        }
    CHECK_THROWS_AS(conv_cdf_route(Measure::uniform(), gauss_kernel(), 0.1, 0.5, 0.0), ValidationError);
}

TEST_CASE("route equivalence on canonical measures") {
    std::mt19937_64 rng(3);
    for (const auto& k : {gauss_kernel(), cauchy_kernel()})
        for (const auto& name : canonical_measure_names()) {
            const auto m = canonical_measure(name);
            std::uniform_real_distribution<double> u(m.support_lower() - 0.1, m.support_upper() + 0.1);
            for (double a : {1.0, 1e-2, 1e-4, 1e-6})
                for (int i = 0; i < 20; ++i) {
                    const double x = u(rng);
                    auto direct = conv(m, k, a, x, true);
                    const auto cdf = conv_cdf_route(m, k, a, x, 1.0);
                    INFO(k.name << " " << name << " a=" << a << " x=" << x);
                    CHECK(close(direct, cdf, 1e-6));
                }
        }
}

TEST_CASE("cwt examples") {
    const auto w = derive_wavelet(gauss_kernel());
    for (double a : {1.0, 0.01, 1e-6}) CHECK(cwt(Measure::dirac(0.0), w, a, 0.0).value == doctest::Approx(1.0 / a));
    CHECK(std::abs(cwt(Measure::uniform(), w, 0.01, 0.5).value) <= 1e-4);
    const double ref = oracle::finite([&](double y) { return w.h((0.3 - y) / 0.2) / 0.2; }, 0.0, 1.0);
    CHECK(cwt(Measure::uniform(), w, 0.2, 0.3).value == doctest::Approx(ref).epsilon(1e-10));
}

TEST_CASE("cwt equals minus a d/da of the scaled transform") {
    const auto k = gauss_kernel();
    const auto w = derive_wavelet(k);
    std::mt19937_64 rng(5);
    for (const char* name : {"uniform", "cantor", "semicircle", "dirac_pair"}) {
        const auto m = canonical_measure(name);
        std::uniform_real_distribution<double> u(m.support_lower() - 0.2, m.support_upper() + 0.2);
        std::vector<std::pair<double, double>> pairs;
        double peak = 0.0;
        for (double a : {0.5, 0.1, 0.02, 0.004})
            for (int i = 0; i < 5; ++i) {
                const double b = u(rng);
                const double h = 1e-4;
                const double fd = -a * (conv(m, k, a * (1 + h), b, true).value -
                                        conv(m, k, a * (1 - h), b, true).value) / (2 * a * h);
                const double W = cwt(m, w, a, b).value;
                pairs.emplace_back(W, fd);
                peak = std::max(peak, std::abs(W));
            }
        for (const auto& [W, fd] : pairs) {
            INFO(name << " W=" << W << " fd=" << fd);
            CHECK(std::abs(W - fd) <= 1e-4 * std::max(std::abs(W), 1e-2 * peak));
        }
    }
}

TEST_CASE("positivity and linearity") {
    const auto k = cauchy_kernel();
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-0.5, 1.5);
    const auto m1 = Measure::cantor();
    const auto m2 = canonical_measure("dirac_pair");
    const auto mix = Measure::mixture({{0.3, m1}, {0.7, m2}});
    for (int i = 0; i < 40; ++i) {
        const double x = u(rng);
        const double a = std::pow(10.0, -4.0 * (i % 5) / 4.0);
        for (const auto& name : canonical_measure_names())
            CHECK(conv(canonical_measure(name), k, a, x, false).value >= 0.0);
        const double lhs = conv(mix, k, a, x, false).value;
        const double rhs = 0.3 * conv(m1, k, a, x, false).value + 0.7 * conv(m2, k, a, x, false).value;
        CHECK(std::abs(lhs - rhs) <= 1e-10);
    }
}

TEST_CASE("off-support decay") {
    for (const auto& k : kernels())
        for (const auto& name : canonical_measure_names()) {
            const auto m = canonical_measure(name);
            const double x = m.support_upper() + 0.5;
            for (double a : {5e-3, 1e-4}) {
                const double v = conv(m, k, a, x, false).value;
                INFO(k.name << " " << name << " a=" << a);
                CHECK(std::abs(v) <= 2 * k.decay_const * std::pow(a / 0.5, k.delta));
            }
        }
}

TEST_CASE("L2 interval integral of an interior atom") {
    const auto k = gauss_kernel();
    const auto r = interval_power_integral(Measure::dirac(0.5), k, 1e-4, 0.0, 1.0, 2.0, false);
    CHECK(r.value == doctest::Approx(std::sqrt(kPi / 2)).epsilon(1e-8));
    // Lebesgue: (1/a) int |a A|^2 ~ a A^2 in the bulk
    const double a = 1e-4;
    const auto l = interval_power_integral(Measure::uniform(), k, a, 0.0, 1.0, 2.0, false);
    CHECK(l.value <= a * k.a_psi * k.a_psi);
    CHECK(l.value >= 0.9 * a * k.a_psi * k.a_psi);
    CHECK_THROWS_AS(interval_power_integral(Measure::uniform(), k, a, 0.0, 1.0, 1.5, true), ValidationError);
    CHECK_THROWS_AS(interval_power_integral(Measure::uniform(), k, a, 1.0, 0.0, 0.5, true), ValidationError);
}

TEST_CASE("L^p interval integral of the uniform density") {
    // int_0^1 |psi~_a * 1_[0,1]|^{1/2} by the oracle at a = 1e-2
    const auto k = gauss_kernel();
    const double a = 1e-2;
    const double ref = oracle::finite_split(
        [&](double x) {
            const double v = 0.5 * std::sqrt(kPi) * (std::erf(x / a) - std::erf((x - 1) / a));
            return std::sqrt(v);
        },
        0.0, 1.0, {10 * a, 0.5, 1 - 10 * a});
    const auto r = interval_power_integral(Measure::uniform(), k, a, 0.0, 1.0, 0.5, true);
    CHECK(r.value == doctest::Approx(ref).epsilon(1e-8));
}

TEST_CASE("Cantor L^p integral follows the self-similar law") {
    // Away from branch interactions I(a/3) = (2/3)(3/2)^p I(a).
    const auto k = gauss_kernel();
    const double factor = (2.0 / 3.0) * std::sqrt(1.5);
    double prev = interval_power_integral(Measure::cantor(), k, 3e-5, 0.0, 1.0, 0.5, true).value;
    for (double a : {1e-5, 1e-5 / 3}) {
        const double cur = interval_power_integral(Measure::cantor(), k, a, 0.0, 1.0, 0.5, true).value;
        CHECK(cur / prev == doctest::Approx(factor).epsilon(1e-3));
        prev = cur;
    }
}

TEST_CASE("wavelet L2 interval integrals") {
    const auto w = derive_wavelet(gauss_kernel());
    const double ch = 0.75 * std::sqrt(kPi / 2);
    CHECK(cwt_interval_l2(Measure::dirac(0.5), w, 1e-4, 0.0, 1.0).value == doctest::Approx(ch).epsilon(1e-8));
    CHECK(cwt_interval_l2(canonical_measure("dirac_pair"), w, 1e-4, 0.0, 1.0).value ==
          doctest::Approx(ch / 4).epsilon(1e-6));
    CHECK(cwt_interval_l2(Measure::uniform(), w, 1e-4, 0.0, 1.0).value <= 1e-3);
}

TEST_CASE("interval segments resolve atoms at a/8") {
    const double a = 1e-3;
    const auto segs = interval_segments(Measure::dirac(0.5), a, 0.0, 1.0);
    double finest = 1.0;
    for (const auto& s : segs)
        if (s.lo <= 0.5 && s.hi >= 0.5) finest = std::min(finest, s.hi - s.lo);
    CHECK(finest <= a / 8 + 1e-15);
    for (const auto& s : segs) CHECK(s.hi - s.lo <= 1.0 / 64 + 1e-15);
}

}  // TEST_SUITE
