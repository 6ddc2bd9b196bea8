#include "specid/criteria.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "specid/error.hpp"

namespace specid {

std::string to_string(LimitStatus s) {
    switch (s) {
    case LimitStatus::converged: return "converged";
    case LimitStatus::diverging: return "diverging";
    case LimitStatus::oscillating: return "oscillating";
    case LimitStatus::inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

std::string to_string(Finiteness f) {
    switch (f) {
    case Finiteness::bounded: return "bounded";
    case Finiteness::divergent: return "divergent";
    case Finiteness::inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

std::pair<double, double> log_log_fit(const std::vector<LimitSample>& s) {
    const std::size_t n = s.size();
    if (n < 2) return {0.0, 0.0};
    double mx = 0.0, my = 0.0;
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        lx[i] = std::log(s[i].scale);
        ly[i] = std::log(std::max(std::abs(s[i].value), 1e-300));
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (sxx <= 0.0) return {0.0, 0.0};
    const double slope = sxy / sxx;
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = ly[i] - my - slope * (lx[i] - mx);
        rss += r * r;
    }
    return {slope, std::sqrt(rss / n)};
}

LimitEstimate summarize(std::vector<LimitSample> samples, double rel_tol) {
    LimitEstimate e;
    e.samples = std::move(samples);
    const auto& s = e.samples;
    const std::size_t n = s.size();
    if (n == 0) {
        e.notes = "no samples";
        return e;
    }
    const std::size_t w = std::min<std::size_t>(8, n);
    const std::vector<LimitSample> tail(s.end() - static_cast<std::ptrdiff_t>(w), s.end());
    std::tie(e.growth_exponent, e.fit_residual) = log_log_fit(tail);
    const double last = s.back().value;

    bool settled = false;
    if (n >= 4) {
        const double tol = rel_tol * std::max(1.0, std::abs(last));
        const double d1 = std::abs(s[n - 3].value - s[n - 4].value);
        const double d2 = std::abs(s[n - 2].value - s[n - 3].value);
        const double d3 = std::abs(s[n - 1].value - s[n - 2].value);
        // Differences at the quadrature tolerance count as zero.
        const double noise = 1e-8 * std::max(1.0, std::abs(last));
        settled = d1 <= tol && d2 <= tol && d3 <= tol && (d1 >= d2 || d2 <= noise) && (d2 >= d3 || d3 <= noise);
    }
    const bool vanishing = n >= 4 && e.growth_exponent >= 0.1 && e.fit_residual < 0.1 &&
                           std::abs(last) <= std::abs(tail.front().value);
    if (vanishing) {
        e.status = LimitStatus::converged;
        e.extrapolated = 0.0;
        e.method = "power-law";
        return e;
    }
    // v_k = L + B q^k on a geometric grid: consecutive differences shrink
    // by a steady factor q, and L = last + d q / (1 - q).
    if (n >= 7) {
        double d[6];
        for (int i = 0; i < 6; ++i) d[i] = s[n - 6 + i].value - s[n - 7 + i].value;
        bool geometric = true;
        double qmin = 1.0, qmax = 0.0, qsum = 0.0;
        for (int i = 0; i < 5 && geometric; ++i) {
            const double q = d[i] == 0.0 ? -1.0 : d[i + 1] / d[i];
            if (!(q >= 0.05 && q <= 0.95)) geometric = false;
            qmin = std::min(qmin, q);
            qmax = std::max(qmax, q);
            if (i >= 2) qsum += q;
        }
        if (geometric && qmax <= 1.05 * qmin) {
            const double q = qsum / 3.0;
            e.status = LimitStatus::converged;
            e.extrapolated = last + d[5] * q / (1.0 - q);
            e.method = "geometric";
            return e;
        }
    }
    if (settled) {
        e.status = LimitStatus::converged;
        e.extrapolated = last;
        e.method = "last";
        return e;
    }
    if (n >= 4 && e.growth_exponent <= -0.1 && e.fit_residual < 0.1) {
        e.status = LimitStatus::diverging;
        e.method = "none";
        return e;
    }
    const std::size_t k = std::min<std::size_t>(20, n);
    int sign_changes = 0;
    double prev = 0.0;
    double lo = s[n - k].value;
    for (std::size_t i = n - k; i < n; ++i) {
        lo = std::min(lo, s[i].value);
        if (i == n - k) continue;
        const double dlt = s[i].value - s[i - 1].value;
        if (dlt != 0.0) {
            if (prev != 0.0 && (dlt > 0.0) != (prev > 0.0)) ++sign_changes;
            prev = dlt;
        }
    }
    e.status = sign_changes >= 2 ? LimitStatus::oscillating : LimitStatus::inconclusive;
    e.extrapolated = lo;
    e.method = "liminf";
    return e;
}

std::vector<LimitSample> parallel_samples(std::size_t n, int jobs, const std::function<LimitSample(std::size_t)>& fn) {
    std::vector<LimitSample> out(n);
    const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    out[i] = fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
    return out;
}

namespace {

std::vector<double> checked_scales(const ScaleGrid& g) {
    g.validate();
    return g.scales();
}

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in (0,1]");
}

}  // namespace

LimitEstimate detect_atom(const Measure& m, const KernelSpec& k, double x, const ScaleGrid& g, int jobs) {
    const auto a = checked_scales(g);
    return summarize(parallel_samples(a.size(), jobs, [&](std::size_t i) {
        const auto v = conv(m, k, a[i], x, false);
        return LimitSample{a[i], v.value, v.est_abs_error};
    }));
}

LimitEstimate alpha_derivative(const Measure& m, const KernelSpec& k, double x, double alpha, const ScaleGrid& g,
                               int jobs) {
    check_alpha(alpha);
    const auto a = checked_scales(g);
    const double ca = c_alpha(k, alpha).c_alpha;
    return summarize(parallel_samples(a.size(), jobs, [&](std::size_t i) {
        const auto v = conv(m, k, a[i], x, false);
        const double f = std::pow(a[i], -alpha) / ca;
        return LimitSample{a[i], v.value * f, v.est_abs_error * std::abs(f)};
    }));
}

LimitEstimate pp_l2_criterion(const Measure& m, const KernelSpec& k, double c, double d, const ScaleGrid& g,
                              int jobs) {
    if (!(c < d)) throw ValidationError("pp_l2_criterion: requires c < d");
    const auto a = checked_scales(g);
    return summarize(parallel_samples(a.size(), jobs, [&](std::size_t i) {
        const auto r = interval_power_integral(m, k, a[i], c, d, 2.0, false);
        return LimitSample{a[i], r.value, r.abs_error};
    }));
}

LimitEstimate ac_lp_criterion(const Measure& m, const KernelSpec& k, double c, double d, double p,
                              const ScaleGrid& g, int jobs) {
    if (!(c < d)) throw ValidationError("ac_lp_criterion: requires c < d");
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("ac_lp_criterion: p must lie in (0,1)");
    const auto a = checked_scales(g);
    return summarize(parallel_samples(a.size(), jobs, [&](std::size_t i) {
        const auto r = interval_power_integral(m, k, a[i], c, d, p, true);
        return LimitSample{a[i], r.value, r.abs_error};
    }));
}

quad::Result wavelet_log_integral(const Measure& m, const WaveletSpec& w, double b, double lo, double hi) {
    if (!(lo > 0.0 && lo <= hi)) throw ValidationError("wavelet_log_integral: requires 0 < lo <= hi");
    const double s0 = std::log(lo);
    const double s1 = std::log(hi);
    std::vector<double> pts{s0, s1};
    for (double s = std::ceil(s0); s < s1; s += 1.0)
        if (s > s0) pts.push_back(s);
    const auto segs = quad::segments_from_breakpoints(std::move(pts));
    // |W(b,a)| <= C_h / a, so values are resolved to 1e-12 of that scale;
    // tighter targets chase the rounding noise of cancelling transforms.
    const double abs_tol = std::max(1e-14, 1e-12 * w.decay_const / lo);
    return quad::integrate([&](double s) { return cwt(m, w, std::exp(s), b).value; }, segs,
                           {.abs_tol = abs_tol, .rel_tol = 1e-11, .max_panels = std::size_t{1} << 16});
}

namespace {

struct LogIntegralSweep {
    std::vector<double> eps;
    std::vector<double> cumulative;  // int_{eps_k}^M W da/a
    std::vector<double> error;
};

LogIntegralSweep sweep_log_integrals(const Measure& m, const WaveletSpec& w, double b, const ScaleGrid& g, double M,
                                     int jobs) {
    LogIntegralSweep out;
    out.eps = checked_scales(g);
    if (!(M > out.eps.front())) throw ValidationError("wavelet criteria: M must exceed the largest epsilon");
    const auto pieces = parallel_samples(out.eps.size(), jobs, [&](std::size_t i) {
        const double hi = i == 0 ? M : out.eps[i - 1];
        const auto r = wavelet_log_integral(m, w, b, out.eps[i], hi);
        return LimitSample{out.eps[i], r.value, r.abs_error};
    });
    quad::detail::Sum sum;
    double err = 0.0;
    for (const auto& p : pieces) {
        sum.add(p.value);
        err += p.abs_error;
        out.cumulative.push_back(sum.value());
        out.error.push_back(err);
    }
    return out;
}

}  // namespace

LimitEstimate wavelet_atom(const Measure& m, const WaveletSpec& w, const KernelSpec& k, double b,
                           const ScaleGrid& eps_grid, double M, int jobs) {
    const auto sw = sweep_log_integrals(m, w, b, eps_grid, M, jobs);
    const double far = conv(m, k, M, b, true).value;
    std::vector<LimitSample> samples;
    double worst = 0.0;
    for (std::size_t i = 0; i < sw.eps.size(); ++i) {
        const double e = sw.eps[i];
        const double quad_route = e * sw.cumulative[i];
        const double telescoped = e * (conv(m, k, e, b, true).value - far);
        worst = std::max(worst, std::abs(quad_route - telescoped) / std::max(1.0, std::abs(telescoped)));
        samples.push_back({e, quad_route, e * sw.error[i]});
    }
    auto est = summarize(std::move(samples));
    std::ostringstream notes;
    notes << "route gap " << worst << "; tail beyond M bounded by eps*" << std::abs(far);
    if (worst > 1e-4) {
        est.status = LimitStatus::inconclusive;
        notes << "; quadrature and telescoped routes disagree beyond 1e-4";
    }
    est.notes = notes.str();
    return est;
}

LimitEstimate wavelet_alpha(const Measure& m, const WaveletSpec& w, const KernelSpec& k, double b, double alpha,
                            const ScaleGrid& eps_grid, double M, int jobs) {
    check_alpha(alpha);
    const auto sw = sweep_log_integrals(m, w, b, eps_grid, M, jobs);
    const double ca = c_alpha(k, alpha).c_alpha;
    const double far = conv(m, k, M, b, true).value;
    std::vector<LimitSample> samples;
    double worst = 0.0;
    for (std::size_t i = 0; i < sw.eps.size(); ++i) {
        const double e = sw.eps[i];
        const double f = std::pow(e, 1.0 - alpha) / ca;
        const double quad_route = f * sw.cumulative[i];
        const double telescoped = f * (conv(m, k, e, b, true).value - far);
        worst = std::max(worst, std::abs(quad_route - telescoped) / std::max(1.0, std::abs(telescoped)));
        samples.push_back({e, quad_route, f * sw.error[i]});
    }
    auto est = summarize(std::move(samples));
    std::ostringstream notes;
    notes << "route gap " << worst;
    est.notes = notes.str();
    return est;
}

LimitEstimate wavelet_pp_l2(const Measure& m, const WaveletSpec& w, double c, double d, const ScaleGrid& g,
                            int jobs) {
    if (!(c < d)) throw ValidationError("wavelet_pp_l2: requires c < d");
    const auto a = checked_scales(g);
    return summarize(parallel_samples(a.size(), jobs, [&](std::size_t i) {
        const auto r = cwt_interval_l2(m, w, a[i], c, d);
        return LimitSample{a[i], r.value, r.abs_error};
    }));
}

Finiteness classify_growth(double growth_exponent) {
    if (growth_exponent >= -0.05) return Finiteness::bounded;
    if (growth_exponent <= -0.1) return Finiteness::divergent;
    return Finiteness::inconclusive;
}

namespace {

std::vector<LimitSample> fit_window(const std::vector<LimitSample>& s) {
    if (s.empty()) return s;
    const double cutoff = s.back().scale * 1e4;
    std::size_t first = s.size();
    while (first > 0 && s[first - 1].scale <= cutoff * (1.0 + 1e-12)) --first;
    first = std::min(first, s.size() >= 8 ? s.size() - 8 : 0);
    return {s.begin() + static_cast<std::ptrdiff_t>(first), s.end()};
}

}  // namespace

FinitenessResult finiteness_scan(const Measure& m, const KernelSpec& k, double x, double alpha, const ScaleGrid& g,
                                 int jobs) {
    check_alpha(alpha);
    const auto a = checked_scales(g);
    FinitenessResult r;
    r.kernel_samples = parallel_samples(a.size(), jobs, [&](std::size_t i) {
        const auto v = conv(m, k, a[i], x, false);
        const double f = std::pow(a[i], -alpha);
        return LimitSample{a[i], v.value * f, v.est_abs_error * f};
    });
    const auto ratios = alpha_ratio_sequence(m, x, alpha, a);
    for (std::size_t i = 0; i < a.size(); ++i) r.ratio_samples.push_back({a[i], ratios.ratios[i], 0.0});
    r.kernel_growth = log_log_fit(fit_window(r.kernel_samples)).first;
    r.ratio_growth = log_log_fit(fit_window(r.ratio_samples)).first;
    r.kernel_side = classify_growth(r.kernel_growth);
    r.ratio_side = classify_growth(r.ratio_growth);
    return r;
}

namespace {

// Golden-section search for the maximum of f on [lo, hi].
double argmax(const std::function<double(double)>& f, double lo, double hi, double tol) {
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - g * (hi - lo);
    double x2 = lo + g * (hi - lo);
    double f1 = f(x1);
    double f2 = f(x2);
    while (hi - lo > tol) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    return 0.5 * (lo + hi);
}

struct Span {
    double lo, hi;
};

std::vector<Span> merge_spans(std::vector<Span> v) {
    std::sort(v.begin(), v.end(), [](const Span& x, const Span& y) { return x.lo < y.lo; });
    std::vector<Span> out;
    for (const auto& s : v) {
        if (!out.empty() && s.lo <= out.back().hi)
            out.back().hi = std::max(out.back().hi, s.hi);
        else
            out.push_back(s);
    }
    return out;
}

}  // namespace

std::vector<DetectedAtom> find_atoms(const Measure& m, const KernelSpec& k, double c, double d,
                                     const ClassifyConfig& cfg) {
    if (!(c < d)) throw ValidationError("find_atoms: requires c < d");
    const double theta = cfg.atom_threshold;
    std::vector<Span> spans{{c, d}};
    double a = (d - c) / 8.0;
    std::vector<std::pair<double, double>> hits;  // (position, value)
    for (;;) {
        std::vector<double> pts;
        for (const auto& s : spans) {
            const double step = 0.5 * a;
            const auto n = static_cast<long>(std::ceil((s.hi - s.lo) / step));
            for (long j = 0; j <= n; ++j) pts.push_back(std::min(s.hi, s.lo + j * step));
        }
        std::sort(pts.begin(), pts.end());
        pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
        const double scale = a;
        const auto vals = parallel_samples(pts.size(), cfg.jobs, [&](std::size_t i) {
            return LimitSample{scale, conv(m, k, scale, pts[i], false).value, 0.0};
        });
        hits.clear();
        for (std::size_t i = 0; i < pts.size(); ++i)
            if (vals[i].value >= theta) hits.emplace_back(pts[i], vals[i].value);
        if (hits.empty() || a <= cfg.atom_scale_min) break;
        std::vector<Span> next;
        for (const auto& [p, v] : hits) next.push_back({std::max(c, p - a), std::min(d, p + a)});
        spans = merge_spans(std::move(next));
        a /= 4.0;
    }

    // Group neighbouring hits; each group is one atom candidate.
    std::vector<DetectedAtom> atoms;
    std::size_t i = 0;
    while (i < hits.size()) {
        std::size_t j = i;
        std::size_t best = i;
        while (j + 1 < hits.size() && hits[j + 1].first - hits[j].first <= 2.0 * a) {
            ++j;
            if (hits[j].second > hits[best].second) best = j;
        }
        const double p0 = hits[best].first;
        const double pos = argmax([&](double x) { return conv(m, k, a, x, false).value; }, std::max(c, p0 - 0.5 * a),
                                  std::min(d, p0 + 0.5 * a), 1e-6 * a);
        const auto est = detect_atom(m, k, pos, cfg.atom_grid, cfg.jobs);
        const double w = est.extrapolated ? *est.extrapolated : est.samples.back().value;
        if (w >= 0.5 * theta) atoms.push_back({pos, w});
        i = j + 1;
    }
    return atoms;
}

SpectralVerdict classify_interval(const Measure& m, const KernelSpec& k, double c, double d,
                                  const ClassifyConfig& cfg) {
    if (!(c < d)) throw ValidationError("classify_interval: requires c < d");
    SpectralVerdict v;
    v.c = c;
    v.d = d;
    std::ostringstream notes;

    v.pp_l2_limit = pp_l2_criterion(m, k, c, d, cfg.interval_grid, cfg.jobs);
    v.ac_lp_limit = ac_lp_criterion(m, k, c, d, 0.5, cfg.interval_grid, cfg.jobs);
    const double pp = v.pp_l2_limit.extrapolated.value_or(v.pp_l2_limit.samples.back().value);
    const double ac = v.ac_lp_limit.extrapolated.value_or(v.ac_lp_limit.samples.back().value);
    v.pp_present = pp > cfg.pp_tol * k.l2_norm_sq;
    const double ac_floor = std::sqrt(std::abs(k.a_psi) * cfg.ac_tol) * std::sqrt(d - c);
    v.ac_present = ac > ac_floor;
    notes << "pp_l2 " << to_string(v.pp_l2_limit.status) << " (" << v.pp_l2_limit.method << ")";
    notes << "; ac_lp " << to_string(v.ac_lp_limit.status) << " (" << v.ac_lp_limit.method << ")";

    v.detected_atoms = find_atoms(m, k, c, d, cfg);
    if (v.pp_present && v.detected_atoms.empty()) notes << "; pp criterion positive but no atom above threshold";

    v.interval_mass = m.interval_mass(c, d, Ends::open());
    if (v.ac_present) {
        // Mass of the smoothed density where it stays below a cap well
        // above the interval's mean density; atoms and singular parts
        // concentrate above the cap at small scales.
        const double a = cfg.interval_grid.a_min();
        const double cap = 50.0 * std::max(v.interval_mass, 1e-12) / (d - c);
        const double A = std::abs(k.a_psi);
        const auto segs = interval_segments(m, a, c, d);
        const auto r = quad::integrate(
            [&](double x) {
                const double f = conv(m, k, a, x, true).value / A;
                const double u = f / cap;
                const double u2 = u * u;
                const double u4 = u2 * u2;
                return f / (1.0 + u4 * u4);
            },
            segs, {.abs_tol = 1e-12, .rel_tol = 1e-6, .max_panels = std::size_t{1} << 20});
        v.ac_mass_estimate = r.value;
    }
    double atom_mass = 0.0;
    for (const auto& at : v.detected_atoms) atom_mass += at.weight;
    const double unexplained = v.interval_mass - atom_mass - v.ac_mass_estimate;
    v.sc_suspected = unexplained > cfg.sc_margin;
    notes << "; unexplained mass " << unexplained;
    v.notes = notes.str();
    return v;
}

}  // namespace specid
