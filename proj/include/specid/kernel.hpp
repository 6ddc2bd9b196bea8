#pragma once

// Approximate-identity kernels psi: even, psi(0) = 1, with the joint decay
// bound |psi(x)| + |x psi'(x)| <= C <x>^{-delta}, delta > 1.

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace specid {

struct KernelSpec {
    using Function = std::function<double(double)>;

    std::string name;
    Function psi;
    Function dpsi;
    double delta = 2.0;
    double decay_const = 1.0;
    double a_psi = 0.0;       // integral of psi
    double l2_norm_sq = 0.0;  // integral of psi^2
    bool nonneg = false;

    // Nonincreasing bounds on sup_{|s| >= t} |f(s)| for psi, psi' and
    // h = psi + x psi'. Used to skip negligible far-field contributions.
    Function psi_tail;
    Function dpsi_tail;
    Function h_tail;
    // Length, in units of the scale a, over which psi and psi' change by
    // O(1) at offset t. Cylinders of singular pieces are resolved finer
    // than this before a fixed Gauss rule is trusted.
    Function resolution;

    double h(double x) const { return psi(x) + x * dpsi(x); }
};

/// Builds a kernel from psi and its derivative. A_psi and the L2 norm are
/// computed by quadrature; tail bounds come from (delta, decay_const).
/// No validation is run here; see validate().
KernelSpec make_kernel(std::string name, KernelSpec::Function psi, KernelSpec::Function dpsi, double delta,
                       double decay_const, bool nonneg);

/// "gauss", "cauchy", "power:D" (also "power(D)"). Throws ValidationError
/// on unknown names or D <= 1.
KernelSpec builtin(const std::string& name);
KernelSpec gauss_kernel();
KernelSpec cauchy_kernel();
KernelSpec power_kernel(double delta);

struct ValidationClause {
    std::string clause;
    bool passed = true;
    std::optional<double> offending_x;
    std::string detail;
};

struct ValidationReport {
    std::string kernel;
    std::vector<ValidationClause> clauses;
    bool ok() const;
    /// First failing clause, if any.
    const ValidationClause* first_failure() const;
};

/// 400 log-spaced points with |x| in [1e-3, 1e6], plus 0.
std::vector<double> default_validation_grid();

/// Checks psi(0) = 1, evenness, the decay bound, the derivative against
/// central differences, delta > 1 and A_psi != 0. Never throws on failure.
ValidationReport validate(const KernelSpec& k, const std::vector<double>& grid = default_validation_grid());

struct WaveletSpec {
    std::string parent;
    KernelSpec::Function h;
    double l2_norm_sq = 0.0;  // C_h
    double delta = 2.0;
    double decay_const = 1.0;  // |h(x)| <= decay_const <x>^{-delta}
    KernelSpec::Function tail;        // parent's h_tail
    KernelSpec::Function resolution;  // parent's resolution
};

/// h(x) = psi(x) + x psi'(x).
WaveletSpec derive_wavelet(const KernelSpec& k);

struct AlphaConstant {
    double alpha = 1.0;
    double c_alpha = 0.0;
    double abs_error = 0.0;
};

/// c_alpha = int_0^inf alpha 2^alpha y^{alpha-1} psi(y) dy for 0 < alpha <= 1.
AlphaConstant c_alpha(const KernelSpec& k, double alpha);

/// int_0^inf f over geometric panels [0,1], [1,2], [2,4], ... stopping once
/// tail_bound(T) falls below tol. Returns value and error estimate.
struct HalfLineIntegral {
    double value = 0.0;
    double abs_error = 0.0;
};
HalfLineIntegral integrate_half_line(const std::function<double(double)>& f,
                                     const std::function<double(double)>& tail_bound, double tol = 1e-14);

}  // namespace specid
