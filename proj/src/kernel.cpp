#include "specid/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "specid/error.hpp"
#include "specid/quadrature.hpp"

namespace specid {

namespace {

double bracket(double t) { return std::sqrt(1.0 + t * t); }

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}

}  // namespace

HalfLineIntegral integrate_half_line(const std::function<double(double)>& f,
                                     const std::function<double(double)>& tail_bound, double tol) {
    const quad::Options opt{.abs_tol = 1e-17, .rel_tol = 1e-14, .max_panels = std::size_t{1} << 16};
    quad::detail::Sum sum;
    double err = 0.0;
    double lo = 0.0;
    double hi = 1.0;
    for (int k = 0; k < 1100; ++k) {
        const auto r = quad::integrate(f, lo, hi, opt);
        sum.add(r.value);
        err += r.abs_error;
        const double tail = tail_bound(hi);
        if (tail <= tol) return {sum.value(), err + tail};
        lo = hi;
        hi *= 2.0;
        if (!std::isfinite(hi)) break;
    }
    throw NumericError("half-line integral: tail bound never fell below " + fmt(tol));
}

KernelSpec make_kernel(std::string name, KernelSpec::Function psi, KernelSpec::Function dpsi, double delta,
                       double decay_const, bool nonneg) {
    if (!psi || !dpsi) throw ValidationError("kernel '" + name + "': psi and its derivative are both required");
    if (!(std::isfinite(delta) && delta > 1.0))
        throw ValidationError("kernel '" + name + "': decay exponent must exceed 1");
    if (!(std::isfinite(decay_const) && decay_const > 0.0))
        throw ValidationError("kernel '" + name + "': decay constant must be positive");
    KernelSpec k;
    k.name = std::move(name);
    k.psi = std::move(psi);
    k.dpsi = std::move(dpsi);
    k.delta = delta;
    k.decay_const = decay_const;
    k.nonneg = nonneg;

    const double C = decay_const;
    k.psi_tail = [C, delta](double t) { return C * std::pow(bracket(t), -delta); };
    k.h_tail = k.psi_tail;
    k.resolution = [](double t) { return 1.0 + t; };
    double dmax = 0.0;
    for (int i = 0; i <= 1000; ++i) dmax = std::max(dmax, std::abs(k.dpsi(i / 1000.0)));
    dmax = std::max(1.25 * dmax, C * std::pow(2.0, -0.5 * delta));
    k.dpsi_tail = [C, delta, dmax](double t) {
        return t >= 1.0 ? C * std::pow(bracket(t), -delta) / t : dmax;
    };

    const auto& p = k.psi;
    const auto a = integrate_half_line(
        p, [C, delta](double T) { return C * std::pow(T, 1.0 - delta) / (delta - 1.0); }, 1e-15);
    k.a_psi = 2.0 * a.value;
    const auto l2 = integrate_half_line(
        [&p](double y) {
            const double v = p(y);
            return v * v;
        },
        [C, delta](double T) { return C * C * std::pow(T, 1.0 - 2.0 * delta) / (2.0 * delta - 1.0); }, 1e-15);
    k.l2_norm_sq = 2.0 * l2.value;
    return k;
}

KernelSpec gauss_kernel() {
    KernelSpec k;
    k.name = "gauss";
    k.psi = [](double x) { return std::exp(-x * x); };
    k.dpsi = [](double x) { return -2.0 * x * std::exp(-x * x); };
    k.delta = 4.0;
    // max over s = x^2 of (1+2s)(1+s)^2 e^{-s} is about 6.13
    k.decay_const = 6.5;
    k.a_psi = std::sqrt(std::numbers::pi);
    k.l2_norm_sq = std::sqrt(std::numbers::pi / 2.0);
    k.nonneg = true;
    k.psi_tail = [](double t) { return std::exp(-t * t); };
    k.dpsi_tail = [](double t) {
        constexpr double peak = 0.70710678118654752;
        return t < peak ? 2.0 * peak * std::exp(-0.5) : 2.0 * t * std::exp(-t * t);
    };
    k.h_tail = [](double t) { return t * t < 1.5 ? 1.0 : (2.0 * t * t - 1.0) * std::exp(-t * t); };
    // log-derivative of e^{-t^2} grows like 2t
    k.resolution = [](double t) { return 1.0 / (1.0 + t); };
    return k;
}

KernelSpec cauchy_kernel() {
    KernelSpec k;
    k.name = "cauchy";
    k.psi = [](double x) { return 1.0 / (1.0 + x * x); };
    k.dpsi = [](double x) {
        const double q = 1.0 + x * x;
        return -2.0 * x / (q * q);
    };
    k.delta = 2.0;
    k.decay_const = 3.0;
    k.a_psi = std::numbers::pi;
    k.l2_norm_sq = std::numbers::pi / 2.0;
    k.nonneg = true;
    k.psi_tail = [](double t) { return 1.0 / (1.0 + t * t); };
    k.dpsi_tail = [](double t) {
        const double s = std::max(t, 1.0 / std::sqrt(3.0));
        const double q = 1.0 + s * s;
        return 2.0 * s / (q * q);
    };
    k.h_tail = [](double t) {
        if (t * t < 3.0) return 1.0;
        const double q = 1.0 + t * t;
        return (t * t - 1.0) / (q * q);
    };
    k.resolution = [](double t) { return 1.0 + t; };
    return k;
}

KernelSpec power_kernel(double delta) {
    if (!(std::isfinite(delta) && delta > 1.0))
        throw ValidationError("power kernel: decay exponent must exceed 1, got " + fmt(delta));
    KernelSpec k;
    k.name = "power:" + fmt(delta);
    k.psi = [delta](double x) { return std::pow(1.0 + x * x, -0.5 * delta); };
    k.dpsi = [delta](double x) { return -delta * x * std::pow(1.0 + x * x, -0.5 * delta - 1.0); };
    k.delta = delta;
    k.decay_const = 1.0 + delta;
    const double sqpi = std::sqrt(std::numbers::pi);
    k.a_psi = sqpi * std::exp(std::lgamma(0.5 * (delta - 1.0)) - std::lgamma(0.5 * delta));
    k.l2_norm_sq = sqpi * std::exp(std::lgamma(delta - 0.5) - std::lgamma(delta));
    k.nonneg = true;
    k.psi_tail = k.psi;
    const double tstar = 1.0 / std::sqrt(delta + 1.0);
    k.dpsi_tail = [delta, tstar](double t) {
        const double s = std::max(t, tstar);
        return delta * s * std::pow(1.0 + s * s, -0.5 * delta - 1.0);
    };
    const double C = k.decay_const;
    k.h_tail = [C, delta](double t) { return C * std::pow(bracket(t), -delta); };
    k.resolution = [](double t) { return 1.0 + t; };
    return k;
}

KernelSpec builtin(const std::string& name) {
    if (name == "gauss") return gauss_kernel();
    if (name == "cauchy") return cauchy_kernel();
    std::string arg;
    if (name.rfind("power:", 0) == 0) {
        arg = name.substr(6);
    } else if (name.rfind("power(", 0) == 0 && name.back() == ')') {
        arg = name.substr(6, name.size() - 7);
    } else {
        throw ValidationError("unknown kernel '" + name + "' (expected gauss, cauchy or power:D)");
    }
    std::size_t used = 0;
    double d = 0.0;
    try {
        d = std::stod(arg, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != arg.size()) throw ValidationError("kernel '" + name + "': bad decay exponent");
    return power_kernel(d);
}

bool ValidationReport::ok() const {
    return std::all_of(clauses.begin(), clauses.end(), [](const auto& c) { return c.passed; });
}

const ValidationClause* ValidationReport::first_failure() const {
    for (const auto& c : clauses)
        if (!c.passed) return &c;
    return nullptr;
}

std::vector<double> default_validation_grid() {
    std::vector<double> g{0.0};
    constexpr int n = 400;
    for (int i = 0; i < n; ++i) g.push_back(std::pow(10.0, -3.0 + 9.0 * i / (n - 1)));
    return g;
}

ValidationReport validate(const KernelSpec& k, const std::vector<double>& grid) {
    if (grid.empty()) throw ValidationError("validate: empty sample grid");
    ValidationReport rep{k.name, {}};
    auto fail_at = [](ValidationClause& c, double x, std::string detail) {
        if (!c.passed) return;
        c.passed = false;
        c.offending_x = x;
        c.detail = std::move(detail);
    };

    auto clause = [](const char* name) {
        ValidationClause c;
        c.clause = name;
        return c;
    };
    auto norm = clause("psi(0)=1");
    const double p0 = k.psi(0.0);
    if (!(std::abs(p0 - 1.0) <= 1e-15)) fail_at(norm, 0.0, "psi(0) = " + fmt(p0));
    auto even = clause("psi even");
    auto decay = clause("decay bound |psi|+|x psi'| <= C<x>^-delta");
    auto deriv = clause("psi' matches central differences");
    constexpr double step = 1e-6;
    for (double x0 : grid) {
        for (double x : {x0, -x0}) {
            const double px = k.psi(x);
            const double dx = k.dpsi(x);
            if (!(std::abs(px - k.psi(-x)) <= 1e-12)) fail_at(even, x, "psi(x) - psi(-x) = " + fmt(px - k.psi(-x)));
            const double lhs = std::abs(px) + std::abs(x * dx);
            const double rhs = k.decay_const * std::pow(bracket(x), -k.delta);
            if (!(lhs <= rhs * (1.0 + 1e-12))) fail_at(decay, x, "lhs " + fmt(lhs) + " > bound " + fmt(rhs));
            const double fd = (k.psi(x + step) - k.psi(x - step)) / (2.0 * step);
            if (!(std::abs(fd - dx) <= 1e-5 * std::abs(dx) + 1e-9))
                fail_at(deriv, x, "psi' = " + fmt(dx) + ", difference quotient " + fmt(fd));
        }
    }
    auto dexp = clause("delta > 1");
    if (!(k.delta > 1.0)) fail_at(dexp, 0.0, "delta = " + fmt(k.delta));
    auto cpos = clause("decay constant > 0");
    if (!(k.decay_const > 0.0)) fail_at(cpos, 0.0, "C = " + fmt(k.decay_const));
    auto apsi = clause("A_psi != 0");
    if (!(std::isfinite(k.a_psi) && std::abs(k.a_psi) > 1e-12)) fail_at(apsi, 0.0, "A_psi = " + fmt(k.a_psi));
    rep.clauses = {norm, even, decay, deriv, dexp, cpos, apsi};
    return rep;
}

WaveletSpec derive_wavelet(const KernelSpec& k) {
    WaveletSpec w;
    w.parent = k.name;
    w.h = [psi = k.psi, dpsi = k.dpsi](double x) { return psi(x) + x * dpsi(x); };
    w.delta = k.delta;
    w.decay_const = k.decay_const;
    w.tail = k.h_tail;
    w.resolution = k.resolution;
    const double C = k.decay_const;
    const double d = k.delta;
    const auto r = integrate_half_line(
        [&w](double y) {
            const double v = w.h(y);
            return v * v;
        },
        [C, d](double T) { return C * C * std::pow(T, 1.0 - 2.0 * d) / (2.0 * d - 1.0); }, 1e-15);
    w.l2_norm_sq = 2.0 * r.value;
    return w;
}

AlphaConstant c_alpha(const KernelSpec& k, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("c_alpha: alpha must lie in (0,1]");
    const double pre = std::pow(2.0, alpha);
    // y = t^{1/alpha} on [0,1] absorbs the y^{alpha-1} singularity.
    const auto inner = quad::integrate([&](double t) { return k.psi(std::pow(t, 1.0 / alpha)); }, 0.0, 1.0,
                                       {.abs_tol = 1e-17, .rel_tol = 1e-14});
    const auto& psi = k.psi;
    const double C = k.decay_const;
    const double d = k.delta;
    const auto outer = integrate_half_line(
        [&](double y) { return y < 1.0 ? 0.0 : alpha * pre * std::pow(y, alpha - 1.0) * psi(y); },
        [=](double T) { return alpha * pre * C * std::pow(T, alpha - d) / (d - alpha); }, 1e-15);
    return {alpha, pre * inner.value + outer.value, pre * inner.abs_error + outer.abs_error};
}

}  // namespace specid
