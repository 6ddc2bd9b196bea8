#pragma once

// Adaptive Gauss-Kronrod integration and Gauss rules built from moments.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <string>
#include <type_traits>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "specid/error.hpp"

namespace specid::quad {

struct Result {
    double value = 0.0;
    double abs_error = 0.0;
    std::size_t panels = 0;
};

struct Options {
    double abs_tol = 1e-15;
    double rel_tol = 1e-12;
    std::size_t max_panels = std::size_t{1} << 20;
};

/// Endpoint clustering for integrable endpoint singularities. A clustered
/// segment is integrated in s in [0,1] with y = lo + (hi-lo) s^power (left)
/// or y = hi - (hi-lo) s^power (right).
enum class Cluster { none, left, right };

struct Segment {
    double lo = 0.0;
    double hi = 0.0;
    Cluster cluster = Cluster::none;
    double power = 2.0;
};

namespace detail {

inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

// Neumaier-compensated accumulator.
struct Sum {
    double s = 0.0;
    double c = 0.0;
    void add(double v) {
        const double t = s + v;
        if (std::abs(s) >= std::abs(v))
            c += (s - t) + v;
        else
            c += (v - t) + s;
        s = t;
    }
    double value() const { return s + c; }
};

template <class G>
Result qk15(G& g, double lo, double hi) {
    const double center = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    const double fc = g(center);
    double resg = fc * kWg[3];
    double resk = fc * kWgk[7];
    double resabs = std::abs(resk);
    std::array<double, 7> f1{}, f2{};
    for (int j = 0; j < 3; ++j) {
        const int jt = 2 * j + 1;
        const double dx = half * kXgk[jt];
        const double v1 = g(center - dx);
        const double v2 = g(center + dx);
        f1[jt] = v1;
        f2[jt] = v2;
        resg += kWg[j] * (v1 + v2);
        resk += kWgk[jt] * (v1 + v2);
        resabs += kWgk[jt] * (std::abs(v1) + std::abs(v2));
    }
    for (int j = 0; j < 4; ++j) {
        const int jt = 2 * j;
        const double dx = half * kXgk[jt];
        const double v1 = g(center - dx);
        const double v2 = g(center + dx);
        f1[jt] = v1;
        f2[jt] = v2;
        resk += kWgk[jt] * (v1 + v2);
        resabs += kWgk[jt] * (std::abs(v1) + std::abs(v2));
    }
    const double reskh = resk * 0.5;
    double resasc = kWgk[7] * std::abs(fc - reskh);
    for (int j = 0; j < 7; ++j)
        resasc += kWgk[j] * (std::abs(f1[j] - reskh) + std::abs(f2[j] - reskh));
    const double ah = std::abs(half);
    const double result = resk * half;
    resabs *= ah;
    resasc *= ah;
    double err = std::abs((resk - resg) * half);
    if (resasc != 0.0 && err != 0.0)
        err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
    constexpr double eps = std::numeric_limits<double>::epsilon();
    if (resabs > std::numeric_limits<double>::min() / (50.0 * eps))
        err = std::max(50.0 * eps * resabs, err);
    if (!std::isfinite(result))
        throw NumericError("quadrature: non-finite integrand value");
    return {result, err, 1};
}

}  // namespace detail

/// Single 15-point Gauss-Kronrod panel.
template <class F>
Result gauss_kronrod15(F&& f, double lo, double hi) {
    return detail::qk15(f, lo, hi);
}

/// Globally adaptive Gauss-Kronrod over a list of segments. Panels are
/// bisected in order of largest estimated error until the total estimate
/// meets max(abs_tol, rel_tol*|I|). Panels whose estimate is dominated by
/// roundoff are kept as they are. Exceeding max_panels is a NumericError.
template <class F>
Result integrate(F&& f, const std::vector<Segment>& segments, const Options& opt = {}) {
    struct Mapped {
        const Segment* seg;
        std::remove_reference_t<F>* fn;
        double operator()(double s) const {
            const double w = seg->hi - seg->lo;
            switch (seg->cluster) {
            case Cluster::left: {
                const double sp = std::pow(s, seg->power - 1.0);
                return (*fn)(seg->lo + w * sp * s) * w * seg->power * sp;
            }
            case Cluster::right: {
                const double sp = std::pow(s, seg->power - 1.0);
                return (*fn)(seg->hi - w * sp * s) * w * seg->power * sp;
            }
            default:
                return (*fn)(s);
            }
        }
    };
    struct Panel {
        std::size_t seg;
        double lo, hi, value, err;
        bool operator<(const Panel& o) const { return err < o.err; }
    };

    std::vector<Mapped> maps;
    maps.reserve(segments.size());
    for (const auto& s : segments) maps.push_back(Mapped{&s, &f});

    std::priority_queue<Panel> heap;
    std::vector<Panel> frozen;
    double total = 0.0;
    double total_err = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const auto& s = segments[i];
        if (!(s.hi > s.lo)) continue;
        const double lo = s.cluster == Cluster::none ? s.lo : 0.0;
        const double hi = s.cluster == Cluster::none ? s.hi : 1.0;
        const auto r = detail::qk15(maps[i], lo, hi);
        heap.push({i, lo, hi, r.value, r.abs_error});
        total += r.value;
        total_err += r.abs_error;
        ++count;
    }
    if (count > opt.max_panels)
        throw NumericError("quadrature: panel budget exceeded (" + std::to_string(count) +
                           " initial panels)");

    while (!heap.empty() && total_err > std::max(opt.abs_tol, opt.rel_tol * std::abs(total))) {
        Panel p = heap.top();
        heap.pop();
        const double mid = 0.5 * (p.lo + p.hi);
        if (!(mid > p.lo && mid < p.hi) || (p.hi - p.lo) <= 1e-15 * std::max(std::abs(p.lo), std::abs(p.hi))) {
            frozen.push_back(p);
            continue;
        }
        if (count + 1 > opt.max_panels)
            throw NumericError("quadrature: panel budget of " + std::to_string(opt.max_panels) +
                               " exceeded (error " + std::to_string(total_err) + ")");
        const auto a = detail::qk15(maps[p.seg], p.lo, mid);
        const auto b = detail::qk15(maps[p.seg], mid, p.hi);
        total += a.value + b.value - p.value;
        total_err += a.abs_error + b.abs_error - p.err;
        ++count;
        // Roundoff: the value has settled but the error estimate does not
        // shrink under bisection. Keep the halves without refining them.
        const double v12 = a.value + b.value;
        if (std::abs(p.value - v12) <= 1e-5 * std::abs(v12) && a.abs_error + b.abs_error >= 0.99 * p.err) {
            frozen.push_back({p.seg, p.lo, mid, a.value, a.abs_error});
            frozen.push_back({p.seg, mid, p.hi, b.value, b.abs_error});
            continue;
        }
        heap.push({p.seg, p.lo, mid, a.value, a.abs_error});
        heap.push({p.seg, mid, p.hi, b.value, b.abs_error});
    }

    // Final sum in a fixed order so the result does not depend on heap layout.
    std::vector<Panel> all = std::move(frozen);
    while (!heap.empty()) {
        all.push_back(heap.top());
        heap.pop();
    }
    std::sort(all.begin(), all.end(), [](const Panel& x, const Panel& y) {
        return x.seg != y.seg ? x.seg < y.seg : x.lo < y.lo;
    });
    detail::Sum sum, esum;
    for (const auto& p : all) {
        sum.add(p.value);
        esum.add(p.err);
    }
    return {sum.value(), esum.value(), count};
}

template <class F>
Result integrate(F&& f, double lo, double hi, const Options& opt = {}) {
    return integrate(f, std::vector<Segment>{{lo, hi}}, opt);
}

/// Sorts, deduplicates and turns breakpoints into plain segments.
std::vector<Segment> segments_from_breakpoints(std::vector<double> pts);

/// Breakpoints lo, lo+first, lo+2 first, lo+4 first, ... up to hi.
std::vector<double> geometric_breakpoints(double lo, double hi, double first);

/// n-point Gauss rule for a positive measure on a bounded interval.
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

using hp_float = boost::multiprecision::cpp_bin_float_50;

/// Builds the n-point Gauss rule from the ordinary moments m_0..m_{2n-1}
/// (Chebyshev algorithm in extended precision, then Golub-Welsch).
GaussRule gauss_rule_from_moments(const std::vector<hp_float>& moments, int n);

}  // namespace specid::quad
