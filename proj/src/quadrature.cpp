#include "specid/quadrature.hpp"

#include <Eigen/Eigenvalues>

namespace specid::quad {

std::vector<Segment> segments_from_breakpoints(std::vector<double> pts) {
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    std::vector<Segment> out;
    if (pts.size() < 2) return out;
    out.reserve(pts.size() - 1);
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) out.push_back({pts[i], pts[i + 1]});
    return out;
}

std::vector<double> geometric_breakpoints(double lo, double hi, double first) {
    std::vector<double> pts{lo};
    double step = first;
    while (lo + step < hi) {
        pts.push_back(lo + step);
        step *= 2.0;
    }
    pts.push_back(hi);
    return pts;
}

GaussRule gauss_rule_from_moments(const std::vector<hp_float>& moments, int n) {
    if (n < 1 || moments.size() < static_cast<std::size_t>(2 * n))
        throw ValidationError("gauss_rule_from_moments: need 2n moments");
    if (!(moments[0] > 0))
        throw ValidationError("gauss_rule_from_moments: zeroth moment must be positive");

    // Chebyshev algorithm (ordinary moments -> three-term recurrence).
    const int m = 2 * n;
    std::vector<hp_float> alpha(n), beta(n);
    std::vector<hp_float> sig_prev(m, hp_float(0)), sig(moments.begin(), moments.begin() + m);
    alpha[0] = moments[1] / moments[0];
    beta[0] = moments[0];
    for (int k = 1; k < n; ++k) {
        std::vector<hp_float> sig_next(m, hp_float(0));
        for (int l = k; l < m - k; ++l)
            sig_next[l] = sig[l + 1] - alpha[k - 1] * sig[l] - beta[k - 1] * sig_prev[l];
        if (!(sig_next[k] > 0))
            throw NumericError("gauss_rule_from_moments: moment sequence not positive definite");
        alpha[k] = sig_next[k + 1] / sig_next[k] - sig[k] / sig[k - 1];
        beta[k] = sig_next[k] / sig[k - 1];
        sig_prev = std::move(sig);
        sig = std::move(sig_next);
    }

    // Golub-Welsch on the Jacobi matrix.
    Eigen::VectorXd diag(n);
    Eigen::VectorXd sub(std::max(n - 1, 1));
    for (int k = 0; k < n; ++k) diag[k] = static_cast<double>(alpha[k]);
    for (int k = 1; k < n; ++k) sub[k - 1] = static_cast<double>(sqrt(beta[k]));
    GaussRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    if (n == 1) {
        rule.nodes[0] = diag[0];
        rule.weights[0] = static_cast<double>(beta[0]);
        return rule;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub.head(n - 1), Eigen::ComputeEigenvectors);
    if (es.info() != Eigen::Success) throw NumericError("gauss_rule_from_moments: eigensolver failed");
    const double b0 = static_cast<double>(beta[0]);
    for (int j = 0; j < n; ++j) {
        rule.nodes[j] = es.eigenvalues()[j];
        const double v = es.eigenvectors()(0, j);
        rule.weights[j] = b0 * v * v;
    }
    return rule;
}

}  // namespace specid::quad
