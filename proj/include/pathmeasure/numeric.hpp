#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace pathmeasure {

// Nodes and weights on [-1, 1].
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Gauss-Legendre rule computed by Newton iteration on the Legendre recurrence.
inline QuadratureRule gauss_legendre(std::size_t n) {
    if (n == 0)
        throw std::invalid_argument("gauss_legendre: order must be positive");
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const std::size_t half = (n + 1) / 2;
    for (std::size_t i = 0; i < half; ++i) {
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                            (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            // Evaluate P_n and P'_n at x.
            double p0 = 1.0, p1 = x;
            for (std::size_t k = 2; k <= n; ++k) {
                const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15)
                break;
        }
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1)
        rule.nodes[n / 2] = 0.0;
    return rule;
}

inline double integrate_gl(const QuadratureRule& rule, double a, double b,
                           const std::function<double(double)>& f) {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
        sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
    return half * sum;
}

namespace detail {

// Integral of the quadratic through (t0,f0),(t1,f1),(t2,f2) over [a, b].
inline double quadratic_segment_integral(double t0, double t1, double t2, double f0, double f1,
                                         double f2, double a, double b) {
    const double d1 = (f1 - f0) / (t1 - t0);
    const double d2 = ((f2 - f1) / (t2 - t1) - d1) / (t2 - t0);
    // f(t) = f0 + d1 (t-t0) + d2 (t-t0)(t-t1)
    auto antiderivative = [&](double t) {
        const double u = t - t0;
        return f0 * u + d1 * u * u / 2.0 + d2 * (u * u * u / 3.0 - (t1 - t0) * u * u / 2.0);
    };
    return antiderivative(b) - antiderivative(a);
}

} // namespace detail

// Composite Simpson on a nonuniform grid; the trailing odd interval is covered
// by the quadratic through the last three samples.
inline double simpson_nonuniform(std::span<const double> t, std::span<const double> f) {
    if (t.size() != f.size())
        throw std::invalid_argument("simpson_nonuniform: size mismatch");
    if (t.size() < 2)
        throw std::domain_error("simpson_nonuniform: need at least two samples");
    if (t.size() == 2)
        return 0.5 * (f[0] + f[1]) * (t[1] - t[0]);
    double sum = 0.0;
    std::size_t i = 0;
    for (; i + 2 < t.size(); i += 2)
        sum += detail::quadratic_segment_integral(t[i], t[i + 1], t[i + 2], f[i], f[i + 1],
                                                  f[i + 2], t[i], t[i + 2]);
    if (i + 1 < t.size()) {
        const std::size_t n = t.size();
        sum += detail::quadratic_segment_integral(t[n - 3], t[n - 2], t[n - 1], f[n - 3], f[n - 2],
                                                  f[n - 1], t[n - 2], t[n - 1]);
    }
    return sum;
}

// Deterministic low-discrepancy points in [0,1)^2 (R2 sequence).
inline std::vector<std::pair<double, double>> low_discrepancy_2d(std::size_t count) {
    constexpr double g = 1.32471795724474602596; // plastic constant
    const double a1 = 1.0 / g;
    const double a2 = 1.0 / (g * g);
    std::vector<std::pair<double, double>> pts;
    pts.reserve(count);
    for (std::size_t k = 1; k <= count; ++k) {
        const double u = std::fmod(0.5 + a1 * static_cast<double>(k), 1.0);
        const double v = std::fmod(0.5 + a2 * static_cast<double>(k), 1.0);
        pts.emplace_back(u, v);
    }
    return pts;
}

} // namespace pathmeasure
