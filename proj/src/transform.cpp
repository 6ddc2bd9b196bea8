#include "specid/transform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "specid/error.hpp"

namespace specid {

namespace {

using Function = KernelSpec::Function;
using quad::detail::Sum;

// A cylinder is treated with one Gauss rule once its width is below
// kLeafEta * a * resolution(dist/a).
constexpr double kLeafEta = 0.25;
// Contributions bounded by this are dropped (and added to the error).
constexpr double kNegligible = 1e-17;
// Interval integrals: neighbourhood radius (in units of a) around
// atoms, ac endpoints and unresolved singular cylinders.
constexpr double kNearRadius = 8.0;

const quad::Options kPointOptions{.abs_tol = 1e-22, .rel_tol = 1e-12, .max_panels = std::size_t{1} << 20};

struct Profile {
    const Function& f;
    const Function& tail;
    const Function& resolution;
};

struct Accum {
    Sum value;
    double err = 0.0;
};

void check_scale(double a) {
    if (!(std::isfinite(a) && a >= kScaleFloor * (1.0 - 1e-12)))
        throw ValidationError("scale a must be finite and >= 1e-9");
}

double distance_to(double x, double lo, double hi) { return std::max({0.0, lo - x, x - hi}); }

// x, x +- a, x +- 2a, x +- 4a, ... inside (lo, hi).
std::vector<double> near_breakpoints(double x, double a, double lo, double hi) {
    std::vector<double> pts;
    if (x > lo && x < hi) pts.push_back(x);
    for (double s = a; x - s > lo || x + s < hi; s *= 2.0) {
        if (x - s > lo && x - s < hi) pts.push_back(x - s);
        if (x + s > lo && x + s < hi) pts.push_back(x + s);
    }
    return pts;
}

// Half-width T (in units of a) beyond which mass * tail(T) is negligible.
double cutoff_radius(const Function& tail, double mass) {
    if (mass * tail(0.0) <= kNegligible) return 0.0;
    double hi = 1.0;
    while (mass * tail(hi) > kNegligible) {
        hi *= 2.0;
        if (hi > 1e300) return std::numeric_limits<double>::infinity();
    }
    double lo = 0.5 * hi;
    for (int i = 0; i < 40; ++i) {
        const double mid = 0.5 * (lo + hi);
        (mass * tail(mid) > kNegligible ? lo : hi) = mid;
    }
    return hi;
}

// Segments of an ac piece restricted to the window x +- T a.
std::vector<quad::Segment> window_segments(const AcPiece& p, double x, double a, double T) {
    const double wlo = std::max(p.lower(), x - T * a);
    const double whi = std::min(p.upper(), x + T * a);
    if (!(wlo < whi)) return {};
    auto pts = near_breakpoints(x, a, wlo, whi);
    pts.push_back(wlo);
    pts.push_back(whi);
    auto segs = p.segments(std::move(pts));
    std::erase_if(segs, [&](const quad::Segment& s) { return s.lo < wlo || s.hi > whi; });
    return segs;
}

std::string piece_context(const char* kind, std::size_t i, const std::string& what) {
    std::ostringstream s;
    s << kind << " piece " << i << ": " << what;
    return s.str();
}

template <class F>
quad::Result integrate_piece(F&& f, const std::vector<quad::Segment>& segs, const char* kind, std::size_t i) {
    try {
        return quad::integrate(f, segs, kPointOptions);
    } catch (const NumericError& e) {
        throw NumericError(piece_context(kind, i, e.what()));
    }
}

double leaf_error(double fine, double coarse) {
    const double d = std::abs(fine - coarse);
    const double mag = std::abs(fine);
    return std::min(d, mag > 0.0 ? d * d / mag : d) + 1e-16 * mag;
}

// Direct route over a singular piece: expand into cylinders until each is
// small against the kernel's variation scale, then apply the attractor's
// Gauss rule on every leaf.
void singular_direct(const SingularPiece& sp, const Profile& pr, double a, double x, double L, double w, double q,
                     Accum& acc) {
    const double t = distance_to(x, L, L + w) / a;
    const double bound = q * pr.tail(t);
    if (bound <= kNegligible) {
        acc.err += bound;
        return;
    }
    if (w <= kLeafEta * a * pr.resolution(t)) {
        const auto& r8 = sp.measure_rule();
        const auto& r4 = sp.coarse_measure_rule();
        Sum fine, coarse;
        for (std::size_t j = 0; j < r8.nodes.size(); ++j)
            fine.add(r8.weights[j] * pr.f((x - L - w * r8.nodes[j]) / a));
        for (std::size_t j = 0; j < r4.nodes.size(); ++j)
            coarse.add(r4.weights[j] * pr.f((x - L - w * r4.nodes[j]) / a));
        acc.value.add(q * fine.value());
        acc.err += leaf_error(q * fine.value(), q * coarse.value());
        return;
    }
    const auto& t_off = sp.offsets();
    const auto& p = sp.probs();
    const double wr = w * sp.ratio();
    for (std::size_t i = 0; i < t_off.size(); ++i) singular_direct(sp, pr, a, x, L + w * t_off[i], wr, q * p[i], acc);
}

TransformValue direct_route(const Measure& m, const Profile& pr, double a, double x) {
    check_scale(a);
    if (!std::isfinite(x)) throw ValidationError("transform: evaluation point must be finite");
    Accum acc;
    for (const auto& at : m.atoms()) acc.value.add(at.weight * pr.f((x - at.position) / a));
    std::size_t i = 0;
    for (const auto& p : m.ac_pieces()) {
        const double bound = p.mass() * pr.tail(distance_to(x, p.lower(), p.upper()) / a);
        if (bound <= kNegligible) {
            acc.err += bound;
        } else {
            const double T = cutoff_radius(pr.tail, p.mass());
            const auto segs = window_segments(p, x, a, T);
            const auto r = integrate_piece([&](double y) { return pr.f((x - y) / a) * p.density(y); }, segs, "ac", i);
            acc.value.add(r.value);
            acc.err += r.abs_error + 2.0 * p.mass() * pr.tail(T);
        }
        ++i;
    }
    for (const auto& sp : m.singular_pieces()) singular_direct(sp, pr, a, x, sp.lower(), sp.width(), sp.mass(), acc);
    return {x, a, acc.value.value(), acc.err};
}

// CDF route over a singular piece. Accumulates -int v'(y) (Phi(y) - c) dy
// over the cylinder [L, L+w] with v(y) = psi((y-x)/a); phi_left is the
// piece's distribution function at L.
struct CdfCtx {
    const SingularPiece& sp;
    const KernelSpec& k;
    double a;
    double x;
    double c;
    std::vector<double> prefix;
    double v(double y) const { return k.psi((y - x) / a); }
};

void singular_cdf(const CdfCtx& cx, double L, double w, double q, double phi_left, Accum& acc) {
    const double R = L + w;
    const double t = distance_to(cx.x, L, R) / cx.a;
    const double dv = cx.v(R) - cx.v(L);
    if (q * cx.k.psi_tail(t) <= kNegligible) {
        acc.value.add(-(phi_left + 0.5 * q - cx.c) * dv);
        acc.err += 0.5 * q * std::abs(dv);
        return;
    }
    if (w <= kLeafEta * cx.a * cx.k.resolution(t)) {
        const auto& r8 = cx.sp.cdf_rule();
        const auto& r4 = cx.sp.coarse_cdf_rule();
        Sum fine, coarse;
        for (std::size_t j = 0; j < r8.nodes.size(); ++j)
            fine.add(r8.weights[j] * cx.k.dpsi((L + w * r8.nodes[j] - cx.x) / cx.a));
        for (std::size_t j = 0; j < r4.nodes.size(); ++j)
            coarse.add(r4.weights[j] * cx.k.dpsi((L + w * r4.nodes[j] - cx.x) / cx.a));
        const double scale = q * w / cx.a;
        acc.value.add(-(phi_left - cx.c) * dv);
        acc.value.add(-scale * fine.value());
        acc.err += leaf_error(scale * fine.value(), scale * coarse.value());
        return;
    }
    const auto& t_off = cx.sp.offsets();
    const auto& p = cx.sp.probs();
    const double wr = w * cx.sp.ratio();
    double prev = L;
    for (std::size_t i = 0; i < t_off.size(); ++i) {
        const double cl = L + w * t_off[i];
        const double phi = phi_left + q * cx.prefix[i];
        if (cl > prev) acc.value.add(-(phi - cx.c) * (cx.v(cl) - cx.v(prev)));
        singular_cdf(cx, cl, wr, q * p[i], phi, acc);
        prev = cl + wr;
    }
    if (R > prev) acc.value.add(-(phi_left + q - cx.c) * (cx.v(R) - cx.v(prev)));
}

}  // namespace

void ScaleGrid::validate() const {
    if (!(std::isfinite(a0) && a0 > 0.0)) throw ValidationError("scale grid: a0 must be positive");
    if (!(ratio > 0.0 && ratio < 1.0)) throw ValidationError("scale grid: ratio must lie in (0,1)");
    if (count < 1) throw ValidationError("scale grid: count must be >= 1");
    if (a_min() < kScaleFloor * (1.0 - 1e-12))
        throw ValidationError("scale grid: smallest scale is below the 1e-9 floor");
}

std::vector<double> ScaleGrid::scales() const {
    std::vector<double> s;
    s.reserve(static_cast<std::size_t>(std::max(count, 0)));
    for (int i = 0; i < count; ++i) s.push_back(a0 * std::pow(ratio, i));
    return s;
}

double ScaleGrid::a_min() const { return a0 * std::pow(ratio, count - 1); }

TransformValue conv(const Measure& m, const KernelSpec& k, double a, double x, bool scaled) {
    auto v = direct_route(m, Profile{k.psi, k.psi_tail, k.resolution}, a, x);
    if (scaled) {
        v.value /= a;
        v.est_abs_error /= a;
    }
    return v;
}

TransformValue conv_cdf_route(const Measure& m, const KernelSpec& k, double a, double x, double alpha) {
    check_scale(a);
    if (!std::isfinite(x)) throw ValidationError("transform: evaluation point must be finite");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("conv_cdf_route: alpha must lie in (0,1]");
    Accum acc;
    // A step of height w at y integrates exactly to w psi((x-y)/a).
    for (const auto& at : m.atoms()) acc.value.add(at.weight * k.psi((x - at.position) / a));

    std::size_t i = 0;
    for (const auto& p : m.ac_pieces()) {
        const double L = p.lower();
        const double R = p.upper();
        const double mass = p.mass();
        if (mass * k.psi_tail(distance_to(x, L, R) / a) <= kNegligible) {
            acc.err += mass * k.psi_tail(distance_to(x, L, R) / a);
            ++i;
            continue;
        }
        const double c = std::clamp(p.cdf(x), 0.0, mass);
        const double T = cutoff_radius(k.psi_tail, mass);
        const auto segs = window_segments(p, x, a, T);
        const auto r = integrate_piece(
            [&](double y) { return -k.dpsi((y - x) / a) / a * (p.cdf(y) - c); }, segs, "ac", i);
        acc.value.add(r.value);
        acc.value.add((mass - c) * k.psi((R - x) / a));
        acc.value.add(c * k.psi((L - x) / a));
        acc.err += r.abs_error + 2.0 * mass * k.psi_tail(T);
        ++i;
    }

    for (const auto& sp : m.singular_pieces()) {
        const double L = sp.lower();
        const double R = sp.upper();
        const double mass = sp.mass();
        if (mass * k.psi_tail(distance_to(x, L, R) / a) <= kNegligible) {
            acc.err += mass * k.psi_tail(distance_to(x, L, R) / a);
            continue;
        }
        CdfCtx cx{sp, k, a, x, std::clamp(sp.cdf(x, kDefaultCdfDepth), 0.0, mass), {}};
        cx.prefix.assign(sp.probs().size(), 0.0);
        for (std::size_t j = 1; j < cx.prefix.size(); ++j) cx.prefix[j] = cx.prefix[j - 1] + sp.probs()[j - 1];
        singular_cdf(cx, L, R - L, mass, 0.0, acc);
        acc.value.add((mass - cx.c) * cx.v(R));
        acc.value.add(cx.c * cx.v(L));
    }
    const double factor = std::pow(a, -alpha);
    return {x, a, acc.value.value() * factor, acc.err * factor};
}

TransformValue cwt(const Measure& m, const WaveletSpec& w, double a, double b) {
    auto v = direct_route(m, Profile{w.h, w.tail, w.resolution}, a, b);
    v.value /= a;
    v.est_abs_error /= a;
    return v;
}

std::vector<quad::Segment> interval_segments(const Measure& m, double a, double c, double d) {
    std::vector<double> pts;
    constexpr int kUniform = 64;
    for (int i = 0; i <= kUniform; ++i) pts.push_back(c + (d - c) * i / kUniform);
    auto add = [&](double y) {
        if (y > c && y < d) pts.push_back(y);
    };
    const double reach = kNearRadius * a;
    for (const auto& at : m.atoms()) {
        if (at.position < c - reach || at.position > d + reach) continue;
        const int n = static_cast<int>(8 * kNearRadius);
        for (int j = -n; j <= n; ++j) add(at.position + j * a / 8.0);
    }
    for (const auto& p : m.ac_pieces()) {
        for (double e : {p.lower(), p.upper()}) {
            if (e < c - reach || e > d + reach) continue;
            for (int j = -static_cast<int>(kNearRadius); j <= static_cast<int>(kNearRadius); ++j) add(e + j * a);
        }
    }
    for (const auto& sp : m.singular_pieces()) {
        const auto& t_off = sp.offsets();
        double max_gap = 0.0;
        for (std::size_t i = 0; i + 1 < t_off.size(); ++i)
            max_gap = std::max(max_gap, t_off[i + 1] - t_off[i] - sp.ratio());
        // Descend until a cylinder is narrower than a or its internal gaps
        // are short enough to be covered by the neighbourhoods of its ends.
        struct Cyl {
            double L, w;
        };
        std::vector<Cyl> stack{{sp.lower(), sp.width()}};
        while (!stack.empty()) {
            const Cyl cy = stack.back();
            stack.pop_back();
            if (cy.L + cy.w < c - reach || cy.L > d + reach) continue;
            if (cy.w <= a || max_gap * cy.w <= 2.0 * reach) {
                const double lo = cy.L - reach;
                const double hi = cy.L + cy.w + reach;
                const auto n = static_cast<long>(std::ceil((hi - lo) / a));
                for (long j = 0; j <= n; ++j) add(lo + (hi - lo) * j / n);
                continue;
            }
            for (std::size_t i = t_off.size(); i-- > 0;) stack.push_back({cy.L + cy.w * t_off[i], cy.w * sp.ratio()});
        }
    }
    std::sort(pts.begin(), pts.end());
    std::vector<double> kept;
    kept.reserve(pts.size());
    const double min_gap = 1e-3 * a;
    for (double y : pts) {
        if (!kept.empty() && y - kept.back() < min_gap) {
            if (y == d) kept.back() = d;
            continue;
        }
        kept.push_back(y);
    }
    if (kept.front() != c) kept.front() = c;
    if (kept.back() != d) kept.back() = d;
    return quad::segments_from_breakpoints(std::move(kept));
}

namespace {

const quad::Options kIntervalOptions{.abs_tol = 1e-16, .rel_tol = 1e-9, .max_panels = std::size_t{1} << 20};

void check_interval(double c, double d) {
    if (!(std::isfinite(c) && std::isfinite(d) && c < d)) throw ValidationError("interval integral: requires c < d");
}

}  // namespace

quad::Result interval_power_integral(const Measure& m, const KernelSpec& k, double a, double c, double d, double p,
                                     bool scaled) {
    check_scale(a);
    check_interval(c, d);
    const bool square = p == 2.0;
    if (!(square || (p > 0.0 && p < 1.0))) throw ValidationError("interval integral: p must be 2 or lie in (0,1)");
    const auto segs = interval_segments(m, a, c, d);
    auto r = quad::integrate(
        [&](double x) {
            const double v = conv(m, k, a, x, scaled).value;
            return square ? v * v : std::pow(std::abs(v), p);
        },
        segs, kIntervalOptions);
    if (square && !scaled) {
        r.value /= a;
        r.abs_error /= a;
    }
    return r;
}

quad::Result cwt_interval_l2(const Measure& m, const WaveletSpec& w, double a, double c, double d) {
    check_scale(a);
    check_interval(c, d);
    const auto segs = interval_segments(m, a, c, d);
    auto r = quad::integrate(
        [&](double b) {
            const double v = cwt(m, w, a, b).value;
            return v * v;
        },
        segs, kIntervalOptions);
    r.value *= a;
    r.abs_error *= a;
    return r;
}

}  // namespace specid
