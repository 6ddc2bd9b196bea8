#include "specid/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "specid/error.hpp"

namespace specid {

namespace {

constexpr int kRuleNodes = 8;

void require(bool ok, const std::string& msg) {
    if (!ok) throw ValidationError(msg);
}

}  // namespace

std::optional<double> cluster_power(double beta) {
    if (beta == 0.0) return std::nullopt;
    const double twice = 2.0 * beta;
    const double r = std::round(twice);
    if (std::abs(twice - r) < 1e-12 && static_cast<long long>(r) % 2 != 0) return 2.0;
    if (beta < 0.0) return 1.0 / (1.0 + beta);
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// AcPiece

AcPiece::AcPiece(std::string shape, double lower, double upper, double mass, Function density,
                 std::optional<Function> cdf, DensityRegularity regularity)
    : shape_(std::move(shape)),
      lower_(lower),
      upper_(upper),
      mass_(mass),
      density_(std::move(density)),
      cdf_(std::move(cdf)),
      regularity_(regularity) {
    require(std::isfinite(lower) && std::isfinite(upper) && lower < upper,
            "ac piece '" + shape_ + "': support must be a finite interval with l < u");
    require(std::isfinite(mass) && mass > 0.0, "ac piece '" + shape_ + "': mass must be positive");
    require(static_cast<bool>(density_), "ac piece '" + shape_ + "': missing density");
    require(regularity_.left_exponent > -1.0 && regularity_.right_exponent > -1.0,
            "ac piece '" + shape_ + "': endpoint exponents must exceed -1 (integrability)");
    require(regularity_.lipschitz.has_value() || regularity_.left_exponent != 0.0 ||
                regularity_.right_exponent != 0.0,
            "ac piece '" + shape_ + "': density needs a Lipschitz constant or endpoint exponents");

    const double w = upper_ - lower_;
    for (int i = 1; i < 256; ++i) {
        const double y = lower_ + w * i / 256.0;
        const double g = density_(y);
        require(std::isfinite(g) && g >= 0.0, "ac piece '" + shape_ + "': density negative or non-finite at " +
                                                  std::to_string(y));
    }
    const auto total = quad::integrate([this](double y) { return density_(y); }, segments({}),
                                       {.abs_tol = 1e-14, .rel_tol = 1e-13});
    require(std::abs(total.value - mass_) <= 1e-10 * std::max(1.0, mass_),
            "ac piece '" + shape_ + "': density integrates to " + std::to_string(total.value) +
                ", declared mass " + std::to_string(mass_));
    if (cdf_) {
        const auto& F = *cdf_;
        require(std::abs(F(lower_)) <= 1e-10 && std::abs(F(upper_) - mass_) <= 1e-10,
                "ac piece '" + shape_ + "': cdf must run from 0 to mass over the support");
        const double h = 1e-5 * w;
        for (int i = 1; i < 32; ++i) {
            const double y = lower_ + w * (0.05 + 0.9 * i / 32.0);
            const double fd = (F(y + h) - F(y - h)) / (2.0 * h);
            const double g = density_(y);
            require(std::abs(fd - g) <= 1e-6 * std::max(1.0, std::abs(g)),
                    "ac piece '" + shape_ + "': cdf derivative disagrees with density at " + std::to_string(y));
        }
    }
}

double AcPiece::density(double y) const {
    if (y < lower_ || y > upper_) return 0.0;
    return density_(y);
}

double AcPiece::cdf(double y) const {
    if (y <= lower_) return 0.0;
    if (y >= upper_) return mass_;
    if (cdf_) return std::clamp((*cdf_)(y), 0.0, mass_);
    std::vector<double> pts{lower_, y};
    auto segs = segments(pts);
    segs.erase(std::remove_if(segs.begin(), segs.end(), [y](const quad::Segment& s) { return s.lo >= y; }),
               segs.end());
    return quad::integrate([this](double t) { return density_(t); }, segs,
                           {.abs_tol = 1e-15, .rel_tol = 1e-13})
        .value;
}

AcPiece AcPiece::scaled(double factor) const {
    require(std::isfinite(factor) && factor > 0.0, "ac piece: scale factor must be positive");
    AcPiece out = *this;
    out.mass_ = mass_ * factor;
    out.density_ = [g = density_, factor](double y) { return factor * g(y); };
    if (cdf_) out.cdf_ = [F = *cdf_, factor](double y) { return factor * F(y); };
    if (out.regularity_.lipschitz) *out.regularity_.lipschitz *= factor;
    return out;
}

std::vector<quad::Segment> AcPiece::segments(std::vector<double> breakpoints) const {
    std::vector<double> pts{lower_, upper_};
    for (double b : breakpoints)
        if (b > lower_ && b < upper_) pts.push_back(b);
    auto segs = quad::segments_from_breakpoints(std::move(pts));
    const auto left = cluster_power(regularity_.left_exponent);
    const auto right = cluster_power(regularity_.right_exponent);
    if (segs.size() == 1 && left && right) {
        const double mid = 0.5 * (lower_ + upper_);
        segs = {{lower_, mid}, {mid, upper_}};
    }
    if (left) {
        segs.front().cluster = quad::Cluster::left;
        segs.front().power = *left;
    }
    if (right) {
        segs.back().cluster = quad::Cluster::right;
        segs.back().power = *right;
    }
    return segs;
}

AcPiece AcPiece::uniform(double lower, double upper, double mass) {
    const double w = upper - lower;
    return AcPiece(
        "uniform", lower, upper, mass, [mass, w](double) { return mass / w; },
        [lower, mass, w](double y) { return mass * (y - lower) / w; }, DensityRegularity{.lipschitz = 0.0});
}

AcPiece AcPiece::sqrt_singular(double lower, double upper, double mass) {
    const double w = upper - lower;
    return AcPiece(
        "sqrt_singular", lower, upper, mass,
        [lower, mass, w](double y) {
            const double s = y - lower;
            return s > 0.0 ? mass / (2.0 * std::sqrt(s * w)) : std::numeric_limits<double>::infinity();
        },
        [lower, mass, w](double y) { return mass * std::sqrt(std::max(0.0, y - lower) / w); },
        DensityRegularity{.lipschitz = std::nullopt, .left_exponent = -0.5});
}

AcPiece AcPiece::semicircle(double lower, double upper, double mass) {
    const double w = upper - lower;
    const auto to_std = [lower, w](double y) { return std::clamp(4.0 * (y - lower) / w - 2.0, -2.0, 2.0); };
    return AcPiece(
        "semicircle", lower, upper, mass,
        [to_std, mass, w](double y) {
            const double t = to_std(y);
            return mass * (4.0 / w) * std::sqrt(std::max(0.0, 4.0 - t * t)) / (2.0 * std::numbers::pi);
        },
        [to_std, mass](double y) {
            const double t = to_std(y);
            const double v = 0.5 + t * std::sqrt(std::max(0.0, 4.0 - t * t)) / (4.0 * std::numbers::pi) +
                             std::asin(t / 2.0) / std::numbers::pi;
            return mass * v;
        },
        DensityRegularity{.lipschitz = std::nullopt, .left_exponent = 0.5, .right_exponent = 0.5});
}

AcPiece make_density_piece(const std::string& shape, double lower, double upper, double mass) {
    if (shape == "uniform") return AcPiece::uniform(lower, upper, mass);
    if (shape == "sqrt_singular") return AcPiece::sqrt_singular(lower, upper, mass);
    if (shape == "semicircle") return AcPiece::semicircle(lower, upper, mass);
    throw ValidationError("unknown density shape '" + shape + "'");
}

std::vector<std::string> density_shapes() { return {"uniform", "sqrt_singular", "semicircle"}; }

// ---------------------------------------------------------------------------
// SingularPiece

struct SingularPiece::Data {
    double ratio;
    std::vector<double> offsets;
    std::vector<double> probs;
    std::vector<long double> offsets_ld;
    std::vector<long double> prefix;  // prefix[i] = sum_{j<i} p_j, size m+1
    // Integer base b with ratio = 1/b and every offset a multiple of 1/b,
    // or 0. Such pieces take exact digit expansions of dyadic inputs.
    int base = 0;
    std::vector<int> digits;
    double lower;
    double upper;
    double max_prob;
    std::vector<double> moments;
    quad::GaussRule measure_rule;
    quad::GaussRule cdf_rule;
    quad::GaussRule coarse_measure_rule;
    quad::GaussRule coarse_cdf_rule;
};

SingularPiece::SingularPiece(double ratio, std::vector<double> offsets, std::vector<double> probs,
                             double lower, double upper, double mass)
    : mass_(mass) {
    const std::size_t m = offsets.size();
    require(std::isfinite(ratio) && ratio > 0.0 && ratio < 1.0, "singular piece: ratio must lie in (0,1)");
    require(m >= 2, "singular piece: need at least two branches");
    require(probs.size() == m, "singular piece: offsets and probs differ in length");
    require(static_cast<double>(m) * ratio < 1.0, "singular piece: m*ratio must be < 1 (Lebesgue-null attractor)");
    require(std::isfinite(lower) && std::isfinite(upper) && lower < upper, "singular piece: bad support");
    require(std::isfinite(mass) && mass > 0.0, "singular piece: mass must be positive");
    double psum = 0.0;
    for (double p : probs) {
        require(std::isfinite(p) && p > 0.0, "singular piece: branch probabilities must be positive");
        psum += p;
    }
    require(std::abs(psum - 1.0) <= 1e-12, "singular piece: branch probabilities must sum to 1");
    require(std::abs(offsets.front()) <= 1e-15 && std::abs(offsets.back() + ratio - 1.0) <= 1e-15,
            "singular piece: first branch must start at 0 and last must end at 1");
    for (std::size_t i = 0; i + 1 < m; ++i)
        require(offsets[i] + ratio <= offsets[i + 1] + 1e-15,
                "singular piece: branch intervals overlap or are unsorted");

    auto d = std::make_shared<Data>();
    d->ratio = ratio;
    d->offsets = offsets;
    d->probs = probs;
    d->lower = lower;
    d->upper = upper;
    d->max_prob = *std::max_element(probs.begin(), probs.end());
    d->prefix.assign(m + 1, 0.0L);
    for (std::size_t i = 0; i < m; ++i) {
        d->offsets_ld.push_back(static_cast<long double>(offsets[i]));
        d->prefix[i + 1] = d->prefix[i] + static_cast<long double>(probs[i]);
    }
    d->prefix[m] = 1.0L;
    const double b = std::round(1.0 / ratio);
    if (b >= 2 && b <= 64 && std::abs(b * ratio - 1.0) <= 1e-15) {
        d->base = static_cast<int>(b);
        for (double t : offsets) {
            const double digit = std::round(t * b);
            if (std::abs(digit - t * b) > 1e-12) {
                d->base = 0;
                d->digits.clear();
                break;
            }
            d->digits.push_back(static_cast<int>(digit));
        }
    }

    // Moments from self-similarity: m_k (1 - r^k) = sum_i p_i sum_{j<k} C(k,j) r^j t_i^{k-j} m_j.
    const int kmax = 2 * kRuleNodes + 1;
    std::vector<quad::hp_float> mom(kmax + 1);
    mom[0] = 1;
    const quad::hp_float r = ratio;
    for (int k = 1; k <= kmax; ++k) {
        quad::hp_float acc = 0;
        for (std::size_t i = 0; i < m; ++i) {
            const quad::hp_float t = offsets[i];
            quad::hp_float binom = 1;
            quad::hp_float inner = 0;
            for (int j = 0; j < k; ++j) {
                inner += binom * pow(r, j) * pow(t, k - j) * mom[j];
                binom = binom * (k - j) / (j + 1);
            }
            acc += quad::hp_float(probs[i]) * inner;
        }
        mom[k] = acc / (1 - pow(r, k));
    }
    d->moments.reserve(kmax + 1);
    for (const auto& v : mom) d->moments.push_back(static_cast<double>(v));
    d->measure_rule = quad::gauss_rule_from_moments(mom, kRuleNodes);
    // Weight Phi(z) dz on [0,1]: int z^k Phi = (1 - m_{k+1}) / (k + 1).
    std::vector<quad::hp_float> cmom(2 * kRuleNodes);
    for (int k = 0; k < 2 * kRuleNodes; ++k) cmom[k] = (1 - mom[k + 1]) / (k + 1);
    d->cdf_rule = quad::gauss_rule_from_moments(cmom, kRuleNodes);
    d->coarse_measure_rule = quad::gauss_rule_from_moments(mom, kRuleNodes / 2);
    d->coarse_cdf_rule = quad::gauss_rule_from_moments(cmom, kRuleNodes / 2);
    d_ = std::move(d);
}

SingularPiece::SingularPiece(std::shared_ptr<const Data> d, double mass) : d_(std::move(d)), mass_(mass) {}

SingularPiece SingularPiece::cantor(double lower, double upper, double mass) {
    return SingularPiece(1.0 / 3.0, {0.0, 2.0 / 3.0}, {0.5, 0.5}, lower, upper, mass);
}

double SingularPiece::ratio() const { return d_->ratio; }
const std::vector<double>& SingularPiece::offsets() const { return d_->offsets; }
const std::vector<double>& SingularPiece::probs() const { return d_->probs; }
double SingularPiece::lower() const { return d_->lower; }
double SingularPiece::upper() const { return d_->upper; }
double SingularPiece::mass() const { return mass_; }
double SingularPiece::max_prob() const { return d_->max_prob; }
const quad::GaussRule& SingularPiece::measure_rule() const { return d_->measure_rule; }
const quad::GaussRule& SingularPiece::cdf_rule() const { return d_->cdf_rule; }
const quad::GaussRule& SingularPiece::coarse_measure_rule() const { return d_->coarse_measure_rule; }
const quad::GaussRule& SingularPiece::coarse_cdf_rule() const { return d_->coarse_cdf_rule; }
const std::vector<double>& SingularPiece::moments() const { return d_->moments; }

double SingularPiece::standard_cdf(double z, int depth) const {
    require(depth >= 1, "cdf depth must be >= 1");
    if (z <= 0.0) return 0.0;
    if (z >= 1.0) return 1.0;
    if (d_->base > 0) {
        // z = n 2^-e exactly; base-b digits come from n*b >> e. A cylinder
        // endpoint within the input's rounding error (half an ulp, scaled
        // by b^k at level k) is taken as the point itself, so 1/3 or 3^-k
        // land on the Cantor endpoints they stand for.
        int ex = 0;
        const double mant = std::frexp(z, &ex);
        const int e = 53 - ex;
        if (e <= 120) {
            using u128 = unsigned __int128;
            u128 n = static_cast<u128>(std::ldexp(mant, 53));
            const u128 one = static_cast<u128>(1) << e;
            const long double snap_limit = std::ldexp(1.0L, e - 20);
            long double slack = 0.5L;
            long double acc = 0.0L;
            long double scale = 1.0L;
            for (int k = 0; k < depth; ++k) {
                n *= static_cast<u128>(d_->base);
                slack *= d_->base;
                const int digit = static_cast<int>(n >> e);
                n &= one - 1;
                const auto it = std::lower_bound(d_->digits.begin(), d_->digits.end(), digit);
                const auto i = static_cast<std::size_t>(it - d_->digits.begin());
                if (it == d_->digits.end() || *it != digit) return static_cast<double>(acc + scale * d_->prefix[i]);
                acc += scale * d_->prefix[i];
                scale *= static_cast<long double>(d_->probs[i]);
                if (n == 0) return static_cast<double>(acc);
                if (slack <= snap_limit) {
                    if (static_cast<long double>(n) <= slack) return static_cast<double>(acc);
                    if (static_cast<long double>(one - n) <= slack) return static_cast<double>(acc + scale);
                }
            }
            return static_cast<double>(acc + scale * std::ldexp(static_cast<long double>(n), -e));
        }
    }
    const auto& t = d_->offsets_ld;
    const long double r = d_->ratio;
    long double zz = z;
    long double acc = 0.0L;
    long double scale = 1.0L;
    for (int k = 0; k < depth; ++k) {
        const auto it = std::upper_bound(t.begin(), t.end(), zz);
        const std::size_t i = static_cast<std::size_t>(std::distance(t.begin(), it)) - 1;
        if (zz > t[i] + r) return static_cast<double>(acc + scale * d_->prefix[i + 1]);
        acc += scale * d_->prefix[i];
        scale *= static_cast<long double>(d_->probs[i]);
        zz = (zz - t[i]) / r;
        if (zz <= 0.0L) return static_cast<double>(acc);
        if (zz >= 1.0L) return static_cast<double>(acc + scale);
    }
    return static_cast<double>(acc + scale * zz);
}

double SingularPiece::cdf(double y, int depth) const {
    const long double z = (static_cast<long double>(y) - d_->lower) / (d_->upper - d_->lower);
    if (z <= 0.0L) return 0.0;
    if (z >= 1.0L) return mass_;
    return mass_ * standard_cdf(static_cast<double>(z), depth);
}

SingularPiece SingularPiece::scaled(double factor) const {
    require(std::isfinite(factor) && factor > 0.0, "singular piece: scale factor must be positive");
    return SingularPiece(d_, mass_ * factor);
}

// ---------------------------------------------------------------------------
// Measure

namespace {

double raw_total(const std::vector<Atom>& atoms, const std::vector<AcPiece>& ac,
                 const std::vector<SingularPiece>& singular) {
    quad::detail::Sum s;
    for (const auto& a : atoms) s.add(a.weight);
    for (const auto& p : ac) s.add(p.mass());
    for (const auto& p : singular) s.add(p.mass());
    return s.value();
}

}  // namespace

Measure::Measure(std::vector<Atom> atoms, std::vector<AcPiece> ac, std::vector<SingularPiece> singular)
    : atoms_(std::move(atoms)), ac_(std::move(ac)), singular_(std::move(singular)) {
    require(!atoms_.empty() || !ac_.empty() || !singular_.empty(), "measure: no components");
    for (const auto& a : atoms_)
        require(std::isfinite(a.position) && std::isfinite(a.weight) && a.weight >= 0.0,
                "measure: atoms need finite position and nonnegative weight");
    const double total = raw_total(atoms_, ac_, singular_);
    require(std::abs(total - 1.0) <= 1e-10,
            "measure: total mass " + std::to_string(total) + " is not 1 (probability measure required)");
    lo_ = std::numeric_limits<double>::infinity();
    hi_ = -lo_;
    for (const auto& a : atoms_) {
        lo_ = std::min(lo_, a.position);
        hi_ = std::max(hi_, a.position);
    }
    for (const auto& p : ac_) {
        lo_ = std::min(lo_, p.lower());
        hi_ = std::max(hi_, p.upper());
    }
    for (const auto& p : singular_) {
        lo_ = std::min(lo_, p.lower());
        hi_ = std::max(hi_, p.upper());
    }
}

Measure Measure::normalized(std::vector<Atom> atoms, std::vector<AcPiece> ac, std::vector<SingularPiece> singular) {
    const double total = raw_total(atoms, ac, singular);
    require(std::isfinite(total) && total > 0.0, "measure: total mass must be positive to normalize");
    for (auto& a : atoms) a.weight /= total;
    for (auto& p : ac) p = p.scaled(1.0 / total);
    for (auto& p : singular) p = p.scaled(1.0 / total);
    return Measure(std::move(atoms), std::move(ac), std::move(singular));
}

Measure Measure::mixture(const std::vector<std::pair<double, Measure>>& parts) {
    double wsum = 0.0;
    std::vector<Atom> atoms;
    std::vector<AcPiece> ac;
    std::vector<SingularPiece> singular;
    for (const auto& [w, m] : parts) {
        require(std::isfinite(w) && w >= 0.0, "mixture: weights must be nonnegative");
        wsum += w;
        if (w == 0.0) continue;
        for (auto a : m.atoms()) atoms.push_back({a.position, a.weight * w});
        for (const auto& p : m.ac_pieces()) ac.push_back(p.scaled(w));
        for (const auto& p : m.singular_pieces()) singular.push_back(p.scaled(w));
    }
    require(std::abs(wsum - 1.0) <= 1e-12, "mixture: weights must sum to 1");
    return Measure(std::move(atoms), std::move(ac), std::move(singular));
}

Measure Measure::dirac(double x) { return Measure({{x, 1.0}}, {}, {}); }
Measure Measure::uniform(double lower, double upper) { return Measure({}, {AcPiece::uniform(lower, upper)}, {}); }
Measure Measure::sqrt_cdf() { return Measure({}, {AcPiece::sqrt_singular(0.0, 1.0)}, {}); }
Measure Measure::cantor() { return Measure({}, {}, {SingularPiece::cantor()}); }
Measure Measure::semicircle() { return Measure({}, {AcPiece::semicircle(-2.0, 2.0)}, {}); }

double Measure::total_mass() const { return raw_total(atoms_, ac_, singular_); }

double Measure::max_singular_prob() const {
    double p = 0.0;
    for (const auto& s : singular_) p = std::max(p, s.max_prob());
    return p;
}

double Measure::cdf(double y, int depth) const {
    require(std::isfinite(y), "cdf: argument must be finite");
    require(depth >= 1, "cdf: depth must be >= 1");
    quad::detail::Sum s;
    for (const auto& a : atoms_)
        if (a.position <= y) s.add(a.weight);
    for (const auto& p : ac_) s.add(p.cdf(y));
    for (const auto& p : singular_) s.add(p.cdf(y, depth));
    return s.value();
}

double Measure::interval_mass(double c, double d, Ends ends, int depth) const {
    require(std::isfinite(c) && std::isfinite(d), "interval_mass: endpoints must be finite");
    require(c <= d, "interval_mass: requires c <= d");
    require(depth >= 1, "interval_mass: depth must be >= 1");
    quad::detail::Sum s;
    for (const auto& a : atoms_) {
        const bool inside = (a.position > c && a.position < d) || (a.position == c && !ends.left_open) ||
                            (a.position == d && !ends.right_open);
        if (inside && !(c == d && (ends.left_open || ends.right_open))) s.add(a.weight);
    }
    for (const auto& p : ac_) s.add(p.cdf(d) - p.cdf(c));
    for (const auto& p : singular_) s.add(p.cdf(d, depth) - p.cdf(c, depth));
    return s.value();
}

Measure canonical_measure(const std::string& name) {
    if (name == "dirac") return Measure::dirac(0.0);
    if (name == "dirac_pair") return Measure({{0.0, 0.5}, {1.0, 0.5}}, {}, {});
    if (name == "uniform") return Measure::uniform();
    if (name == "sqrt_cdf") return Measure::sqrt_cdf();
    if (name == "cantor") return Measure::cantor();
    if (name == "semicircle") return Measure::semicircle();
    if (name == "mixture")
        return Measure({{0.5, 0.3}}, {AcPiece::uniform(0.0, 1.0, 0.2)}, {SingularPiece::cantor(0.0, 1.0, 0.5)});
    throw ValidationError("unknown canonical measure '" + name + "'");
}

std::vector<std::string> canonical_measure_names() {
    return {"dirac", "dirac_pair", "uniform", "sqrt_cdf", "cantor", "semicircle", "mixture"};
}

AlphaDerivativeSample alpha_ratio_sequence(const Measure& m, double x, double alpha,
                                           std::span<const double> epsilons) {
    require(std::isfinite(x), "alpha_ratio_sequence: x must be finite");
    require(alpha > 0.0 && alpha <= 1.0, "alpha_ratio_sequence: alpha must lie in (0,1]");
    for (std::size_t k = 0; k < epsilons.size(); ++k) {
        require(epsilons[k] > 0.0, "alpha_ratio_sequence: epsilons must be positive");
        require(k == 0 || epsilons[k] < epsilons[k - 1], "alpha_ratio_sequence: epsilons must strictly decrease");
    }
    AlphaDerivativeSample out{x, alpha, {epsilons.begin(), epsilons.end()}, {}};
    out.ratios.reserve(epsilons.size());
    for (double e : epsilons) {
        const double mass = m.interval_mass(x - e, x + e, Ends::open());
        out.ratios.push_back(std::max(0.0, mass) / std::pow(2.0 * e, alpha));
    }
    return out;
}

double LebesgueParts::ac_density(double y) const {
    double g = 0.0;
    for (const auto& p : ac) g += p.density(y);
    return g;
}

double LebesgueParts::ac_mass() const {
    double s = 0.0;
    for (const auto& p : ac) s += p.mass();
    return s;
}

LebesgueParts lebesgue_parts(const Measure& m) {
    LebesgueParts out;
    for (const auto& a : m.atoms())
        if (a.weight > 0.0) out.pp_atoms.push_back(a);
    out.ac = m.ac_pieces();
    for (const auto& p : m.singular_pieces()) out.singular_mass += p.mass();
    return out;
}

}  // namespace specid
