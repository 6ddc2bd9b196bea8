#include "specid/operator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "specid/error.hpp"
#include "specid/json_io.hpp"

namespace specid {

using nlohmann::json;

OperatorModel OperatorModel::dense(Eigen::MatrixXd entries) {
    if (entries.rows() == 0 || entries.rows() != entries.cols())
        throw ValidationError("operator: dense matrix must be square and nonempty");
    if (!entries.allFinite()) throw ValidationError("operator: matrix entries must be finite");
    for (Eigen::Index i = 0; i < entries.rows(); ++i)
        for (Eigen::Index j = i + 1; j < entries.cols(); ++j)
            if (entries(i, j) != entries(j, i))
                throw ValidationError("operator: matrix is not symmetric at (" + std::to_string(i) + "," +
                                      std::to_string(j) + ")");
    OperatorModel m;
    m.kind_ = Kind::dense_symmetric;
    m.name_ = "dense";
    m.dense_ = std::move(entries);
    return m;
}

OperatorModel OperatorModel::tridiagonal(std::vector<double> diag, std::vector<double> offdiag) {
    if (diag.empty()) throw ValidationError("operator: tridiagonal diagonal must be nonempty");
    if (offdiag.size() + 1 != diag.size())
        throw ValidationError("operator: offdiag must have one entry fewer than diag");
    for (double v : diag)
        if (!std::isfinite(v)) throw ValidationError("operator: diagonal entries must be finite");
    for (double v : offdiag)
        if (!std::isfinite(v)) throw ValidationError("operator: offdiagonal entries must be finite");
    OperatorModel m;
    m.kind_ = Kind::tridiagonal;
    m.name_ = "tridiagonal";
    m.diag_ = std::move(diag);
    m.offdiag_ = std::move(offdiag);
    return m;
}

OperatorModel OperatorModel::analytic(std::string name, Measure spectral) {
    OperatorModel m;
    m.kind_ = Kind::analytic;
    m.name_ = std::move(name);
    m.measure_.emplace(std::move(spectral));
    return m;
}

int OperatorModel::dim() const {
    switch (kind_) {
        case Kind::dense_symmetric:
            return static_cast<int>(dense_.rows());
        case Kind::tridiagonal:
            return static_cast<int>(diag_.size());
        case Kind::analytic:
            return 0;
    }
    return 0;
}

const Measure& OperatorModel::analytic_measure() const {
    if (!measure_) throw ValidationError("operator: not an analytic model");
    return *measure_;
}

Eigen::VectorXd OperatorModel::apply(const Eigen::VectorXd& v) const {
    if (!finite()) throw ValidationError("operator: analytic models have no matrix");
    if (v.size() != dim()) throw ValidationError("operator: vector dimension mismatch");
    if (kind_ == Kind::dense_symmetric) return dense_ * v;
    const auto n = static_cast<Eigen::Index>(diag_.size());
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double s = diag_[i] * v[i];
        if (i > 0) s += offdiag_[i - 1] * v[i - 1];
        if (i + 1 < n) s += offdiag_[i] * v[i + 1];
        out[i] = s;
    }
    return out;
}

OperatorModel free_jacobi(int n) {
    if (n < 1) throw ValidationError("free_jacobi: size must be positive");
    return OperatorModel::tridiagonal(std::vector<double>(n, 0.0), std::vector<double>(n - 1, 1.0));
}

std::vector<std::string> analytic_model_names() { return {"free_jacobi_halfline", "cantor"}; }

OperatorModel analytic_model(const std::string& name) {
    if (name == "free_jacobi_halfline") return OperatorModel::analytic(name, Measure::semicircle());
    if (name == "cantor") return OperatorModel::analytic(name, Measure::cantor());
    throw ValidationError("unknown analytic model '" + name + "'");
}

Eigensystem eigensystem(const OperatorModel& A) {
    if (!A.finite()) throw ValidationError("eigensystem: analytic models have no matrix");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    if (A.kind() == OperatorModel::Kind::dense_symmetric) {
        solver.compute(A.dense_entries(), Eigen::ComputeEigenvectors);
    } else {
        const Eigen::Map<const Eigen::VectorXd> diag(A.diagonal().data(), A.dim());
        const Eigen::Map<const Eigen::VectorXd> off(A.offdiagonal().data(), A.dim() - 1);
        solver.computeFromTridiagonal(diag, off, Eigen::ComputeEigenvectors);
    }
    if (solver.info() != Eigen::Success) throw NumericError("eigensystem: symmetric eigensolver did not converge");

    Eigensystem es;
    es.values = solver.eigenvalues();
    es.vectors = solver.eigenvectors();
    es.norm = es.values.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < es.values.size(); ++i) {
        const Eigen::VectorXd v = es.vectors.col(i);
        es.residual = std::max(es.residual, (A.apply(v) - es.values[i] * v).norm());
    }
    const double scale = es.norm > 0.0 ? es.norm : 1.0;
    if (!(es.residual <= 1e-10 * scale)) {
        std::ostringstream msg;
        msg << "eigensystem: residual " << es.residual << " exceeds 1e-10 * |A| = " << 1e-10 * scale;
        throw NumericError(msg.str());
    }
    return es;
}

namespace {

void check_unit(const Eigen::VectorXd& f, Eigen::Index dim) {
    if (f.size() != dim)
        throw ValidationError("spectral measure: vector has " + std::to_string(f.size()) + " components, operator dim " +
                              std::to_string(dim));
    if (!f.allFinite()) throw ValidationError("spectral measure: vector components must be finite");
    if (std::abs(f.norm() - 1.0) > 1e-12) throw ValidationError("spectral measure: vector must have unit norm");
}

}  // namespace

SpectralMeasureResult spectral_measure(const Eigensystem& es, const Eigen::VectorXd& f) {
    check_unit(f, es.values.size());
    const Eigen::VectorXd coef = es.vectors.transpose() * f;
    const double merge = 1e-12 * (es.norm > 0.0 ? es.norm : 1.0);

    std::vector<Atom> atoms;
    // Runs of eigenvalues with consecutive gaps below merge become one atom
    // at their weighted mean position.
    double pos_sum = 0.0;
    double w_sum = 0.0;
    auto flush = [&] {
        if (w_sum > 0.0) atoms.push_back({pos_sum / w_sum, w_sum});
        pos_sum = w_sum = 0.0;
    };
    for (Eigen::Index i = 0; i < es.values.size(); ++i) {
        if (i > 0 && es.values[i] - es.values[i - 1] > merge) flush();
        const double w = coef[i] * coef[i];
        pos_sum += w * es.values[i];
        w_sum += w;
    }
    flush();
    return {Measure(std::move(atoms), {}, {}), es.residual};
}

SpectralMeasureResult spectral_measure(const OperatorModel& A, const Eigen::VectorXd& f) {
    if (!A.finite()) throw ValidationError("spectral_measure: requires a finite operator");
    check_unit(f, A.dim());
    return spectral_measure(eigensystem(A), f);
}

Measure spectral_measure_of(const OperatorModel& A, const Eigen::VectorXd& f) {
    if (A.finite()) return spectral_measure(A, f).measure;
    if (f.size() > 0) {
        const bool e1 = f[0] == 1.0 && (f.size() == 1 || f.tail(f.size() - 1).cwiseAbs().maxCoeff() == 0.0);
        if (!e1) throw ValidationError("analytic model '" + A.name() + "' only carries the measure of e1");
    }
    return A.analytic_measure();
}

double expectation_transform(const Eigensystem& es, const Eigen::VectorXd& f, const KernelSpec& k, double lambda,
                             double a, bool scaled) {
    if (!(a > 0.0) || !std::isfinite(a)) throw ValidationError("expectation_transform: scale must be positive");
    check_unit(f, es.values.size());
    const Eigen::VectorXd coef = es.vectors.transpose() * f;
    quad::detail::Sum s;
    for (Eigen::Index i = 0; i < es.values.size(); ++i) s.add(k.psi((es.values[i] - lambda) / a) * coef[i] * coef[i]);
    return scaled ? s.value() / a : s.value();
}

double expectation_transform(const OperatorModel& A, const Eigen::VectorXd& f, const KernelSpec& k, double lambda,
                             double a, bool scaled) {
    if (!A.finite()) return conv(spectral_measure_of(A, f), k, a, lambda, scaled).value;
    return expectation_transform(eigensystem(A), f, k, lambda, a, scaled);
}

LimitEstimate point_spectrum_test(const OperatorModel& A, const Eigen::VectorXd& f, double lambda,
                                  const KernelSpec& k, const ScaleGrid& g, int jobs) {
    const Measure m = spectral_measure_of(A, f);
    auto est = detect_atom(m, k, lambda, g, jobs);
    if (!A.finite() || m.atoms().empty()) return est;

    const Atom* nearest = &m.atoms().front();
    for (const auto& at : m.atoms())
        if (std::abs(at.position - lambda) < std::abs(nearest->position - lambda)) nearest = &at;
    const double dist = std::abs(nearest->position - lambda);
    std::ostringstream notes;
    notes << est.notes << (est.notes.empty() ? "" : "; ") << "nearest weighted eigenvalue " << nearest->position
          << " at distance " << dist << " with weight " << nearest->weight;
    if (dist > 0.0 && dist < 100.0 * g.a_min())
        notes << "; gap warning: distance below 100 * a_min, the limit reflects that eigenvalue";
    else if (dist > 0.0 && dist < g.a0)
        notes << "; gap warning: eigenvalue inside the coarse scales, only scales below " << dist / 10.0
              << " separate it";
    est.notes = notes.str();
    return est;
}

bool indicates_point_spectrum(const LimitEstimate& e, double tol) {
    return e.extrapolated && std::abs(*e.extrapolated) > tol;
}

AcOverlapReport ac_overlap_test(const OperatorModel& A, const Eigen::VectorXd& f, double lo, double hi,
                                const KernelSpec& k, const ScaleGrid& g, int n, double tol, int jobs) {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
        throw ValidationError("ac_overlap_test: needs a bounded interval lo < hi");
    if (n < 1) throw ValidationError("ac_overlap_test: grid size must be positive");
    g.validate();
    const Measure m = spectral_measure_of(A, f);
    const auto scales = g.scales();

    AcOverlapReport r;
    r.tol = tol;
    int hits = 0;
    for (int j = 0; j < n; ++j) {
        const double lam = lo + (j + 0.5) * (hi - lo) / n;
        auto est = summarize(parallel_samples(scales.size(), jobs, [&](std::size_t i) {
            const auto v = conv(m, k, scales[i], lam, true);
            return LimitSample{scales[i], v.value, v.est_abs_error};
        }));
        if (est.status == LimitStatus::converged && est.extrapolated && std::abs(*est.extrapolated) > tol) ++hits;
        r.lambdas.push_back(lam);
        r.limits.push_back(std::move(est));
    }
    r.fraction = static_cast<double>(hits) / n;
    r.overlap = r.fraction > 0.5;
    return r;
}

IntervalTestsReport interval_tests(const OperatorModel& A, double c, double d, const KernelSpec& k, double p,
                                   const ScaleGrid& g, double pp_tol, double ac_tol, int jobs) {
    if (!(c < d)) throw ValidationError("interval_tests: requires c < d");
    IntervalTestsReport r;
    r.c = c;
    r.d = d;
    r.pp_threshold = pp_tol * k.l2_norm_sq;
    // Density level ac_tol over the whole interval, pushed through Hoelder.
    r.ac_threshold = std::pow(std::abs(k.a_psi) * ac_tol, p) * std::pow(d - c, 1.0 - p);

    std::vector<Measure> measures;
    if (A.finite()) {
        const auto es = eigensystem(A);
        for (int n = 0; n < A.dim(); ++n)
            measures.push_back(spectral_measure(es, Eigen::VectorXd::Unit(A.dim(), n)).measure);
    } else {
        measures.push_back(A.analytic_measure());
    }
    for (const auto& m : measures) {
        auto pp = pp_l2_criterion(m, k, c, d, g, jobs);
        auto ac = ac_lp_criterion(m, k, c, d, p, g, jobs);
        if (!pp.extrapolated || *pp.extrapolated > r.pp_threshold) r.pp_empty = false;
        if (!ac.extrapolated || *ac.extrapolated > r.ac_threshold) r.ac_empty = false;
        r.pp.push_back(std::move(pp));
        r.ac.push_back(std::move(ac));
    }
    return r;
}

namespace {

std::vector<double> number_array(const json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_array())
        throw ValidationError(std::string("operator: field '") + key + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto& v : j.at(key)) {
        if (!v.is_number()) throw ValidationError(std::string("operator: field '") + key + "' must hold numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

Eigen::VectorXd normalized(Eigen::VectorXd f) {
    if (!f.allFinite()) throw ValidationError("operator: vector components must be finite");
    const double n = f.norm();
    if (!(n > 0.0)) throw ValidationError("operator: vector must be nonzero");
    return f / n;
}

Eigen::VectorXd basis_vector(const std::string& text, const OperatorModel& A) {
    int idx = 0;
    try {
        std::size_t used = 0;
        idx = std::stoi(text.substr(1), &used);
        if (used + 1 != text.size()) throw std::invalid_argument(text);
    } catch (const std::exception&) {
        throw ValidationError("operator: bad basis vector '" + text + "'");
    }
    if (!A.finite()) {
        if (idx != 1) throw ValidationError("analytic model '" + A.name() + "' only carries the measure of e1");
        return {};
    }
    if (idx < 1 || idx > A.dim())
        throw ValidationError("operator: basis vector '" + text + "' outside dimension " + std::to_string(A.dim()));
    return Eigen::VectorXd::Unit(A.dim(), idx - 1);
}

}  // namespace

OperatorModel operator_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("operator: spec must be a JSON object");
    if (!j.contains("kind") || !j.at("kind").is_string()) throw ValidationError("operator: missing string field 'kind'");
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "tridiagonal") {
        check_keys(j, {"kind", "diag", "offdiag", "f"}, "operator");
        return OperatorModel::tridiagonal(number_array(j, "diag"), number_array(j, "offdiag"));
    }
    if (kind == "dense") {
        check_keys(j, {"kind", "rows", "f"}, "operator");
        if (!j.contains("rows") || !j.at("rows").is_array() || j.at("rows").empty())
            throw ValidationError("operator: field 'rows' must be a nonempty array of arrays");
        const auto& rows = j.at("rows");
        const auto n = static_cast<Eigen::Index>(rows.size());
        Eigen::MatrixXd m(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& row = rows.at(i);
            if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n)
                throw ValidationError("operator: row " + std::to_string(i) + " must have " + std::to_string(n) +
                                      " numbers");
            for (Eigen::Index c = 0; c < n; ++c) {
                if (!row.at(c).is_number()) throw ValidationError("operator: matrix entries must be numbers");
                m(i, c) = row.at(c).get<double>();
            }
        }
        return OperatorModel::dense(std::move(m));
    }
    if (kind == "analytic") {
        check_keys(j, {"kind", "name", "f"}, "operator");
        if (!j.contains("name") || !j.at("name").is_string())
            throw ValidationError("operator: analytic spec needs a string 'name'");
        return analytic_model(j.at("name").get<std::string>());
    }
    throw ValidationError("operator: unknown kind '" + kind + "'");
}

Eigen::VectorXd vector_from_json(const json& j, const OperatorModel& A) {
    if (j.is_string()) return parse_vector(j.get<std::string>(), A);
    if (!j.is_array()) throw ValidationError("operator: vector must be \"eK\" or an array of numbers");
    if (!A.finite()) throw ValidationError("analytic model '" + A.name() + "' only carries the measure of e1");
    if (static_cast<int>(j.size()) != A.dim())
        throw ValidationError("operator: vector has " + std::to_string(j.size()) + " components, operator dim " +
                              std::to_string(A.dim()));
    Eigen::VectorXd f(A.dim());
    for (int i = 0; i < A.dim(); ++i) {
        if (!j.at(i).is_number()) throw ValidationError("operator: vector components must be numbers");
        f[i] = j.at(i).get<double>();
    }
    return normalized(std::move(f));
}

Eigen::VectorXd parse_vector(const std::string& text, const OperatorModel& A) {
    if (!text.empty() && text[0] == 'e') return basis_vector(text, A);
    json arr = json::array();
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const double v = std::stod(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            arr.push_back(v);
        } catch (const std::exception&) {
            throw ValidationError("operator: bad vector component '" + item + "'");
        }
    }
    return vector_from_json(arr, A);
}

LoadedOperator load_operator(const std::string& ref) {
    const std::string prefix = "analytic:";
    if (ref.rfind(prefix, 0) == 0) return {analytic_model(ref.substr(prefix.size())), {}};
    const json j = read_json_file(ref);
    auto model = operator_from_json(j);
    Eigen::VectorXd f = j.contains("f") ? vector_from_json(j.at("f"), model) : parse_vector("e1", model);
    return {std::move(model), std::move(f)};
}

}  // namespace specid
