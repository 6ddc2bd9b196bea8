#pragma once

// Reference values computed independently of the library: Boost quadrature
// on closed-form integrands, digit-expansion Cantor function, closed forms.

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <functional>
#include <initializer_list>
#include <numbers>

namespace oracle {

inline double finite(const std::function<double(double)>& f, double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 18, 1e-13);
}

// Integrable endpoint singularities.
inline double singular(const std::function<double(double)>& f, double a, double b) {
    boost::math::quadrature::tanh_sinh<double> ts;
    return ts.integrate(f, a, b, 1e-14);
}

// Splits [a,b] at the given interior points first.
inline double finite_split(const std::function<double(double)>& f, double a, double b, std::initializer_list<double> cuts) {
    double s = 0.0, lo = a;
    for (double c : cuts)
        if (c > lo && c < b) {
            s += finite(f, lo, c);
            lo = c;
        }
    return s + finite(f, lo, b);
}

inline double half_line(const std::function<double(double)>& f) {
    boost::math::quadrature::exp_sinh<double> es;
    return es.integrate(f, 0.0, std::numeric_limits<double>::infinity(), 1e-14);
}

inline double whole_line(const std::function<double(double)>& f) {
    return half_line(f) + half_line([&](double x) { return f(-x); });
}

// Middle-thirds Cantor function by ternary digits.
inline double cantor_function(double x, int depth = 60) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    long double y = x;
    long double value = 0.0L;
    long double bit = 0.5L;
    for (int i = 0; i < depth; ++i) {
        y *= 3.0L;
        const int digit = static_cast<int>(std::floor(y));
        y -= digit;
        if (digit == 1) return static_cast<double>(value + bit);
        if (digit == 2) value += bit;
        bit *= 0.5L;
    }
    return static_cast<double>(value);
}

inline double semicircle_density(double x) {
    return std::abs(x) < 2.0 ? std::sqrt(4.0 - x * x) / (2.0 * std::numbers::pi) : 0.0;
}

inline double semicircle_cdf(double x) {
    if (x <= -2.0) return 0.0;
    if (x >= 2.0) return 1.0;
    return 0.5 + (x * std::sqrt(4.0 - x * x) / 4.0 + std::asin(x / 2.0)) / std::numbers::pi;
}

}  // namespace oracle
