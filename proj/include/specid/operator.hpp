#pragma once

// Self-adjoint operators given as finite real-symmetric matrices or as
// closed-form spectral measures, and the spectral tests run on <f, E(.) f>.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "specid/criteria.hpp"
#include "specid/kernel.hpp"
#include "specid/measure.hpp"
#include "specid/transform.hpp"

namespace specid {

class OperatorModel {
public:
    enum class Kind { dense_symmetric, tridiagonal, analytic };

    /// Rejects non-square, non-finite or not exactly symmetric input.
    static OperatorModel dense(Eigen::MatrixXd entries);
    /// offdiag.size() must be diag.size() - 1.
    static OperatorModel tridiagonal(std::vector<double> diag, std::vector<double> offdiag);
    /// Infinite operator known only through the spectral measure of its
    /// distinguished vector e_1.
    static OperatorModel analytic(std::string name, Measure spectral);

    Kind kind() const { return kind_; }
    bool finite() const { return kind_ != Kind::analytic; }
    /// Matrix dimension; 0 for analytic models.
    int dim() const;
    const std::string& name() const { return name_; }

    const Eigen::MatrixXd& dense_entries() const { return dense_; }
    const std::vector<double>& diagonal() const { return diag_; }
    const std::vector<double>& offdiagonal() const { return offdiag_; }
    const Measure& analytic_measure() const;

    /// A v for finite models.
    Eigen::VectorXd apply(const Eigen::VectorXd& v) const;

private:
    OperatorModel() = default;
    Kind kind_ = Kind::dense_symmetric;
    std::string name_;
    Eigen::MatrixXd dense_;
    std::vector<double> diag_;
    std::vector<double> offdiag_;
    std::optional<Measure> measure_;
};

/// Free Jacobi matrix of size n: zero diagonal, unit off-diagonals.
OperatorModel free_jacobi(int n);

/// Closed-form models: "free_jacobi_halfline" (semicircle on [-2,2]) and
/// "cantor" (middle-thirds Cantor measure).
OperatorModel analytic_model(const std::string& name);
std::vector<std::string> analytic_model_names();

struct Eigensystem {
    Eigen::VectorXd values;   // ascending
    Eigen::MatrixXd vectors;  // columns
    double residual = 0.0;    // max_i |A v_i - lambda_i v_i|
    double norm = 0.0;        // max |lambda_i|
};

/// Full eigendecomposition; NumericError if the solver fails or the
/// residual exceeds 1e-10 * norm.
Eigensystem eigensystem(const OperatorModel& A);

struct SpectralMeasureResult {
    Measure measure;
    double eigen_residual = 0.0;
};

/// Atoms at the eigenvalues with weights |<v_i, f>|^2. Eigenvalues within
/// 1e-12 * norm are merged and zero weights dropped.
SpectralMeasureResult spectral_measure(const OperatorModel& A, const Eigen::VectorXd& f);
SpectralMeasureResult spectral_measure(const Eigensystem& es, const Eigen::VectorXd& f);

/// Spectral measure of f for finite models; the model's own measure for
/// analytic ones, where f must be empty or e_1.
Measure spectral_measure_of(const OperatorModel& A, const Eigen::VectorXd& f);

/// <f, psi_a(A - lambda) f> by functional calculus; scaled divides by a.
double expectation_transform(const OperatorModel& A, const Eigen::VectorXd& f, const KernelSpec& k,
                             double lambda, double a, bool scaled);
double expectation_transform(const Eigensystem& es, const Eigen::VectorXd& f, const KernelSpec& k,
                             double lambda, double a, bool scaled);

/// detect_atom on the spectral measure of f. For finite models the notes
/// give the nearest weighted eigenvalue and warn when the grid cannot
/// separate it from lambda.
LimitEstimate point_spectrum_test(const OperatorModel& A, const Eigen::VectorXd& f, double lambda,
                                  const KernelSpec& k, const ScaleGrid& g, int jobs = 1);

/// A nonzero atom limit means lambda is an eigenvalue with
/// <f, E({lambda}) f> equal to the limit.
bool indicates_point_spectrum(const LimitEstimate& e, double tol = 1e-6);

struct AcOverlapReport {
    std::vector<double> lambdas;
    std::vector<LimitEstimate> limits;
    double tol = 0.0;
    double fraction = 0.0;
    bool overlap = false;
};

/// Scaled transform limits at n equispaced interior points of (lo, hi);
/// overlap is reported when more than half are converged with
/// |limit| > tol.
AcOverlapReport ac_overlap_test(const OperatorModel& A, const Eigen::VectorXd& f, double lo, double hi,
                                const KernelSpec& k, const ScaleGrid& g, int n = 20, double tol = 1e-3,
                                int jobs = 1);

struct IntervalTestsReport {
    double c = 0.0;
    double d = 0.0;
    std::vector<LimitEstimate> pp;  // one per basis vector
    std::vector<LimitEstimate> ac;
    double pp_threshold = 0.0;
    double ac_threshold = 0.0;
    bool pp_empty = true;
    bool ac_empty = true;
};

/// pp_l2_criterion and ac_lp_criterion on mu_{e_n} for every standard
/// basis vector (the single distinguished vector for analytic models).
/// A pp limit counts as zero below pp_tol * C. An ac limit counts as zero
/// below (|A_psi| ac_tol)^p (d-c)^{1-p}, the largest value a density bounded
/// by ac_tol can produce.
IntervalTestsReport interval_tests(const OperatorModel& A, double c, double d, const KernelSpec& k, double p,
                                   const ScaleGrid& g, double pp_tol = 1e-4, double ac_tol = 0.01, int jobs = 1);

/// {"kind":"tridiagonal","diag","offdiag"} | {"kind":"dense","rows"} |
/// {"kind":"analytic","name"}, each with an optional "f".
OperatorModel operator_from_json(const nlohmann::json& j);
/// "e1".."eN" or explicit components, normalized. Empty for analytic models.
Eigen::VectorXd vector_from_json(const nlohmann::json& j, const OperatorModel& A);
/// Parses "eK" or comma-separated components.
Eigen::VectorXd parse_vector(const std::string& text, const OperatorModel& A);

struct LoadedOperator {
    OperatorModel model;
    Eigen::VectorXd f;
};

/// Loads "analytic:NAME" or a JSON file; f defaults to e_1.
LoadedOperator load_operator(const std::string& ref);

}  // namespace specid
