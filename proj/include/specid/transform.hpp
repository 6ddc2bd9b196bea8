#pragma once

// Kernel transforms of a measure: (psi_a * mu)(x), its scaled form
// (1/a)(psi_a * mu)(x), the wavelet transform W_h(mu)(b,a), and interval
// integrals of their powers.

#include <vector>

#include "specid/kernel.hpp"
#include "specid/measure.hpp"
#include "specid/quadrature.hpp"

namespace specid {

/// Smallest scale the transforms accept.
inline constexpr double kScaleFloor = 1e-9;

/// Scales a_k = a0 * ratio^k, k = 0..count-1.
struct ScaleGrid {
    double a0 = 1.0;
    double ratio = 0.70710678118654752;
    int count = 60;

    /// Throws ValidationError unless a0 > 0, ratio in (0,1), count >= 1
    /// and the smallest scale is >= kScaleFloor.
    void validate() const;
    std::vector<double> scales() const;
    double a_min() const;

    /// Pointwise criteria: 1, 2^{-1/2}, ... down to about 1.3e-9.
    static ScaleGrid point_default() { return {1.0, 0.70710678118654752, 60}; }
    /// Interval criteria: 1e-2 halving down to about 1.2e-6.
    static ScaleGrid interval_default() { return {1e-2, 0.5, 14}; }
};

struct TransformValue {
    double x_or_b = 0.0;
    double a = 0.0;
    double value = 0.0;
    double est_abs_error = 0.0;
};

/// Sum over atoms, density quadrature over ac pieces, and a cylinder
/// Gauss-rule expansion over singular pieces. scaled divides by a.
TransformValue conv(const Measure& m, const KernelSpec& k, double a, double x, bool scaled);

/// a^{-alpha} (psi_a * mu)(x) evaluated from the distribution function:
/// -(1/a) int psi'((y-x)/a) Phi(y) dy, piece by piece.
TransformValue conv_cdf_route(const Measure& m, const KernelSpec& k, double a, double x, double alpha);

/// W_h(mu)(b,a) = (1/a) int h((b-y)/a) dmu(y).
TransformValue cwt(const Measure& m, const WaveletSpec& w, double a, double b);

/// int_c^d |T(x)|^p dx with T = scaled ? (psi~_a * mu) : (psi_a * mu).
/// For p = 2 and unscaled the result is multiplied by 1/a.
/// p must be 2 or lie in (0,1).
quad::Result interval_power_integral(const Measure& m, const KernelSpec& k, double a, double c, double d, double p,
                                     bool scaled);

/// a * int_c^d |W_h(mu)(b,a)|^2 db. The factor a makes the small-scale
/// limit C_h (sum of squared atom weights + half the endpoint ones).
quad::Result cwt_interval_l2(const Measure& m, const WaveletSpec& w, double a, double c, double d);

/// Quadrature segments used by the interval integrals: uniform (d-c)/64
/// grid, width a/8 panels near atoms, width a panels near ac endpoints and
/// around singular cylinders that are not yet resolved at scale a.
std::vector<quad::Segment> interval_segments(const Measure& m, double a, double c, double d);

}  // namespace specid
