#pragma once

// Probability measures on the real line stored by their Lebesgue
// decomposition: atoms, density pieces and self-similar singular pieces.

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "specid/quadrature.hpp"

namespace specid {

inline constexpr int kDefaultCdfDepth = 60;

struct Atom {
    double position = 0.0;
    double weight = 0.0;
};

/// Declared smoothness of a density. Endpoint exponents describe
/// g(y) ~ |y - e|^exponent at the support ends; quadrature clusters nodes
/// there. A density with no declared exponents must give a Lipschitz bound.
struct DensityRegularity {
    std::optional<double> lipschitz;
    double left_exponent = 0.0;
    double right_exponent = 0.0;
};

/// Substitution power that removes an endpoint singularity |y-e|^beta,
/// or nullopt when the endpoint is smooth.
std::optional<double> cluster_power(double beta);

/// Absolutely continuous piece with density supported on [lower, upper].
class AcPiece {
public:
    using Function = std::function<double(double)>;

    AcPiece(std::string shape, double lower, double upper, double mass, Function density,
            std::optional<Function> cdf, DensityRegularity regularity);

    static AcPiece uniform(double lower, double upper, double mass = 1.0);
    /// CDF mass*sqrt((y-l)/(u-l)); density blows up like (y-l)^{-1/2}.
    static AcPiece sqrt_singular(double lower, double upper, double mass = 1.0);
    /// Wigner semicircle mapped affinely onto [lower, upper].
    static AcPiece semicircle(double lower, double upper, double mass = 1.0);

    const std::string& shape() const { return shape_; }
    double lower() const { return lower_; }
    double upper() const { return upper_; }
    double mass() const { return mass_; }
    bool has_closed_form_cdf() const { return cdf_.has_value(); }
    const DensityRegularity& regularity() const { return regularity_; }

    /// Density value; zero outside the support.
    double density(double y) const;
    /// Mass of (-inf, y].
    double cdf(double y) const;

    /// Same shape with every mass multiplied by factor.
    AcPiece scaled(double factor) const;

    /// Quadrature segments over [lo, hi] ∩ support split at the given
    /// breakpoints, with endpoint clustering where the density is singular.
    std::vector<quad::Segment> segments(std::vector<double> breakpoints) const;

private:
    std::string shape_;
    double lower_;
    double upper_;
    double mass_;
    Function density_;
    std::optional<Function> cdf_;
    DensityRegularity regularity_;
};

/// Makes a density piece from its registered shape id
/// ("uniform", "sqrt_singular", "semicircle").
AcPiece make_density_piece(const std::string& shape, double lower, double upper, double mass);
std::vector<std::string> density_shapes();

/// Self-similar measure of an IFS z -> ratio*z + offset_i with branch
/// probabilities, transported affinely onto [lower, upper] and scaled to mass.
/// Branch images must have disjoint interiors with m*ratio < 1, so the
/// attractor is Lebesgue-null; the first branch starts at 0 and the last
/// ends at 1.
class SingularPiece {
public:
    SingularPiece(double ratio, std::vector<double> offsets, std::vector<double> probs,
                  double lower, double upper, double mass);

    /// Middle-thirds Cantor measure.
    static SingularPiece cantor(double lower = 0.0, double upper = 1.0, double mass = 1.0);

    double ratio() const;
    const std::vector<double>& offsets() const;
    const std::vector<double>& probs() const;
    double lower() const;
    double upper() const;
    double width() const { return upper() - lower(); }
    double mass() const;
    double max_prob() const;

    /// CDF of the unit-mass attractor measure on [0,1] by digit expansion.
    /// Truncation error is at most max_prob()^depth.
    double standard_cdf(double z, int depth) const;
    /// Mass of (-inf, y] for this piece.
    double cdf(double y, int depth) const;

    /// Gauss rule for the unit attractor measure on [0,1].
    const quad::GaussRule& measure_rule() const;
    /// Gauss rule for the weight standard_cdf(z) dz on [0,1].
    const quad::GaussRule& cdf_rule() const;
    /// Half-size rules for the same weights, used for error estimates.
    const quad::GaussRule& coarse_measure_rule() const;
    const quad::GaussRule& coarse_cdf_rule() const;
    /// Raw moments of the unit attractor measure, m_0..m_{2n}.
    const std::vector<double>& moments() const;

    SingularPiece scaled(double factor) const;

private:
    struct Data;
    explicit SingularPiece(std::shared_ptr<const Data> d, double mass);
    std::shared_ptr<const Data> d_;
    double mass_;
};

/// Endpoint inclusion flags for interval_mass.
struct Ends {
    bool left_open = false;
    bool right_open = false;
    static constexpr Ends closed() { return {false, false}; }
    static constexpr Ends open() { return {true, true}; }
};

class Measure {
public:
    /// Rejects anything whose total mass differs from 1 by more than 1e-10.
    Measure(std::vector<Atom> atoms, std::vector<AcPiece> ac, std::vector<SingularPiece> singular);

    /// Rescales the given parts to unit total mass.
    static Measure normalized(std::vector<Atom> atoms, std::vector<AcPiece> ac,
                              std::vector<SingularPiece> singular);
    /// Convex combination; weights must be nonnegative and sum to 1.
    static Measure mixture(const std::vector<std::pair<double, Measure>>& parts);

    static Measure dirac(double x);
    static Measure uniform(double lower = 0.0, double upper = 1.0);
    static Measure sqrt_cdf();
    static Measure cantor();
    static Measure semicircle();

    const std::vector<Atom>& atoms() const { return atoms_; }
    const std::vector<AcPiece>& ac_pieces() const { return ac_; }
    const std::vector<SingularPiece>& singular_pieces() const { return singular_; }

    double total_mass() const;
    double support_lower() const { return lo_; }
    double support_upper() const { return hi_; }
    /// Largest branch probability over singular pieces (0 if none).
    double max_singular_prob() const;

    /// mu((-inf, y]).
    double cdf(double y, int depth = kDefaultCdfDepth) const;
    /// mu of the interval between c and d with endpoint atoms per ends.
    double interval_mass(double c, double d, Ends ends, int depth = kDefaultCdfDepth) const;

private:
    std::vector<Atom> atoms_;
    std::vector<AcPiece> ac_;
    std::vector<SingularPiece> singular_;
    double lo_ = 0.0;
    double hi_ = 0.0;
};

/// Canonical test measures by name: dirac, dirac_pair, uniform, sqrt_cdf,
/// cantor, semicircle, mixture (0.5 Cantor + 0.3 delta_0.5 + 0.2 uniform).
Measure canonical_measure(const std::string& name);
std::vector<std::string> canonical_measure_names();

struct AlphaDerivativeSample {
    double x = 0.0;
    double alpha = 1.0;
    std::vector<double> epsilons;
    std::vector<double> ratios;
};

/// ratios[k] = mu((x-eps_k, x+eps_k)) / (2 eps_k)^alpha.
AlphaDerivativeSample alpha_ratio_sequence(const Measure& m, double x, double alpha,
                                           std::span<const double> epsilons);

/// Ground-truth decomposition; meant for test harnesses only.
struct LebesgueParts {
    std::vector<Atom> pp_atoms;
    std::vector<AcPiece> ac;
    double singular_mass = 0.0;

    bool has_ac() const { return !ac.empty(); }
    double ac_density(double y) const;
    double ac_mass() const;
};

LebesgueParts lebesgue_parts(const Measure& m);

}  // namespace specid
