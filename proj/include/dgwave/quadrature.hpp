#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>

#include "dgwave/dense_matrix.hpp"

namespace dgwave {

/// Gauss-Legendre rule on the reference interval [-1, 1].
struct QuadratureRule {
    Vector nodes;
    Vector weights;

    std::size_t size() const { return nodes.size(); }
};

namespace detail {

// Legendre P_n and its derivative at x, by the three-term recurrence.
inline std::pair<double, double> legendre_with_derivative(std::size_t n, double x) {
    double p_prev = 1.0, p = x;
    if (n == 0) return {1.0, 0.0};
    for (std::size_t m = 1; m < n; ++m) {
        const double p_next = ((2.0 * m + 1.0) * x * p - m * p_prev) / (m + 1.0);
        p_prev = p;
        p = p_next;
    }
    const double dp = n * (x * p - p_prev) / (x * x - 1.0);
    return {p, dp};
}

} // namespace detail

/// n-point Gauss-Legendre rule. Nodes are the roots of P_n located by Newton
/// iteration from Chebyshev initial guesses; exact for polynomials of degree
/// 2n-1.
inline QuadratureRule gauss_legendre(std::size_t n) {
    if (n < 1 || n > 64) throw std::invalid_argument("gauss_legendre supports 1..64 points");

    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);

    if (n == 1) {
        rule.nodes[0] = 0.0;
        rule.weights[0] = 2.0;
        return rule;
    }

    const std::size_t half = (n + 1) / 2;
    for (std::size_t i = 0; i < half; ++i) {
        // root estimate near the upper end of [-1,1], refined by Newton
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            const auto [p, d] = detail::legendre_with_derivative(n, x);
            dp = d;
            const double dx = p / d;
            x -= dx;
            if (std::abs(dx) <= 1e-15) break;
        }
        const auto [p_final, d_final] = detail::legendre_with_derivative(n, x);
        (void)p_final;
        dp = d_final;
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);

        rule.nodes[i] = -x;
        rule.weights[i] = w;
        rule.nodes[n - 1 - i] = x;
        rule.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0; // exact midpoint for odd rules
    return rule;
}

} // namespace dgwave
