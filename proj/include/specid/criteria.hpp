#pragma once

// Small-scale limit estimators built on the kernel transforms, and the
// interval classifier that combines them.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "specid/kernel.hpp"
#include "specid/measure.hpp"
#include "specid/transform.hpp"

namespace specid {

enum class LimitStatus { converged, diverging, oscillating, inconclusive };
std::string to_string(LimitStatus s);

struct LimitSample {
    double scale = 0.0;  // a or epsilon
    double value = 0.0;
    double abs_error = 0.0;
};

struct LimitEstimate {
    std::vector<LimitSample> samples;
    std::optional<double> extrapolated;
    LimitStatus status = LimitStatus::inconclusive;
    // Least-squares slope of log|value| against log(scale) over the last
    // eight samples; negative means growth as the scale shrinks.
    double growth_exponent = 0.0;
    double fit_residual = 0.0;
    // How extrapolated was obtained: "last", "power-law", "geometric",
    // "liminf" or "none".
    std::string method = "none";
    std::string notes;
};

/// Convergence diagnostics for a sweep ordered from coarse to fine scale.
///  converged:   checked in this order: a clean power law |v| ~ scale^g
///               with g >= 0.1 (extrapolated = 0); differences shrinking by
///               a steady factor q in [0.05, 0.95] over the last six steps
///               (extrapolated = v + d q/(1-q)); last three |delta| <=
///               tol*max(1,|v|) and non-increasing (extrapolated = v);
///  diverging:   growth exponent <= -0.1 with fit residual < 0.1;
///  oscillating: bounded with at least two sign changes among the deltas;
/// otherwise inconclusive. Non-converged bounded sweeps report the minimum
/// of the last 20 samples.
LimitEstimate summarize(std::vector<LimitSample> samples, double rel_tol = 1e-4);

/// Least-squares slope and RMS residual of log|v| against log(scale).
std::pair<double, double> log_log_fit(const std::vector<LimitSample>& samples);

/// Evaluates fn(0..n-1) on up to jobs threads; results keep index order.
std::vector<LimitSample> parallel_samples(std::size_t n, int jobs, const std::function<LimitSample(std::size_t)>& fn);

/// (psi_a * mu)(x) over the grid; the limit is mu({x}).
LimitEstimate detect_atom(const Measure& m, const KernelSpec& k, double x, const ScaleGrid& g, int jobs = 1);

/// a^{-alpha} (psi_a * mu)(x) / c_alpha; the limit is the alpha-derivative.
LimitEstimate alpha_derivative(const Measure& m, const KernelSpec& k, double x, double alpha, const ScaleGrid& g,
                               int jobs = 1);

/// (1/a) int_c^d |psi_a * mu|^2; the limit is C (sum of squared interior
/// atom weights + half the squared endpoint weights).
LimitEstimate pp_l2_criterion(const Measure& m, const KernelSpec& k, double c, double d, const ScaleGrid& g,
                              int jobs = 1);

/// int_c^d |psi~_a * mu|^p for 0 < p < 1; the limit is |A_psi|^p int |g_ac|^p.
LimitEstimate ac_lp_criterion(const Measure& m, const KernelSpec& k, double c, double d, double p,
                              const ScaleGrid& g, int jobs = 1);

/// eps * int_eps^M W_h(mu)(b,a) da/a; the limit is mu({b}). Samples come
/// from log-scale quadrature of the wavelet transform and are checked
/// against the telescoped form eps[(psi~_eps * mu)(b) - (psi~_M * mu)(b)].
LimitEstimate wavelet_atom(const Measure& m, const WaveletSpec& w, const KernelSpec& k, double b,
                           const ScaleGrid& eps_grid, double M = 1.0, int jobs = 1);

/// eps^{1-alpha} int_eps^M W_h(mu)(b,a) da/a / c_alpha.
LimitEstimate wavelet_alpha(const Measure& m, const WaveletSpec& w, const KernelSpec& k, double b, double alpha,
                            const ScaleGrid& eps_grid, double M = 1.0, int jobs = 1);

/// a int_c^d |W_h(mu)(b,a)|^2 db; the limit is C_h times the atom sum.
LimitEstimate wavelet_pp_l2(const Measure& m, const WaveletSpec& w, double c, double d, const ScaleGrid& g,
                            int jobs = 1);

/// Integral of W_h(mu)(b, a) da/a over [lo, hi] by quadrature in log a.
quad::Result wavelet_log_integral(const Measure& m, const WaveletSpec& w, double b, double lo, double hi);

enum class Finiteness { bounded, divergent, inconclusive };
std::string to_string(Finiteness f);

/// bounded if the growth exponent is >= -0.05, divergent if <= -0.1.
Finiteness classify_growth(double growth_exponent);

struct FinitenessResult {
    Finiteness kernel_side = Finiteness::inconclusive;
    Finiteness ratio_side = Finiteness::inconclusive;
    double kernel_growth = 0.0;
    double ratio_growth = 0.0;
    std::vector<LimitSample> kernel_samples;
    std::vector<LimitSample> ratio_samples;
    bool agree() const { return kernel_side == ratio_side; }
};

/// Growth of a^{-alpha}(psi_a * mu)(x) and, as an independent check, of
/// mu((x-eps, x+eps))/(2 eps)^alpha over the same scales. The fit uses the
/// samples covering the last four decades of scale (at least eight), so
/// log-periodic wiggles of self-similar measures average out.
FinitenessResult finiteness_scan(const Measure& m, const KernelSpec& k, double x, double alpha, const ScaleGrid& g,
                                 int jobs = 1);

struct DetectedAtom {
    double position = 0.0;
    double weight = 0.0;
};

struct ClassifyConfig {
    ScaleGrid interval_grid = ScaleGrid::interval_default();
    ScaleGrid atom_grid = ScaleGrid::point_default();
    double pp_tol = 1e-4;         // pp present if limit > pp_tol * C
    double ac_tol = 0.01;         // density level below which ac counts as absent
    double sc_margin = 0.05;      // unexplained mass needed to flag sc
    double atom_threshold = 1e-3;  // smallest atom weight searched for
    double atom_scale_min = 1e-8;
    int jobs = 1;
};

struct SpectralVerdict {
    double c = 0.0;
    double d = 0.0;
    std::vector<DetectedAtom> detected_atoms;
    LimitEstimate pp_l2_limit;
    LimitEstimate ac_lp_limit;
    bool pp_present = false;
    bool ac_present = false;
    bool sc_suspected = false;
    double interval_mass = 0.0;
    double ac_mass_estimate = 0.0;
    std::string notes;
};

/// Locates atoms in [c,d] by zooming in on points where the unscaled
/// transform stays above the threshold, then measures each with detect_atom.
std::vector<DetectedAtom> find_atoms(const Measure& m, const KernelSpec& k, double c, double d,
                                     const ClassifyConfig& cfg);

/// pp from the L2 criterion, ac from the L^{1/2} criterion, sc from mass
/// accounting: mu((c,d)) minus detected atoms minus the ac mass estimate.
SpectralVerdict classify_interval(const Measure& m, const KernelSpec& k, double c, double d,
                                  const ClassifyConfig& cfg = {});

}  // namespace specid
