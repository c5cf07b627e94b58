#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "dgwave/quadrature.hpp"

namespace dgwave {

/// Half-open time slab (t_start, t_end]; index is the 1-based slab number.
struct TimeSlab {
    std::size_t index = 0;
    double t_start = 0.0;
    double t_end = 0.0;

    double length() const { return t_end - t_start; }
};

/// One factor of a basis-product integrand: basis index (1-based) and
/// time-derivative order (0, 1 or 2).
struct BasisFactor {
    int index = 1;
    int derivative = 0;
};

/// Shifted Legendre basis of degree q on a slab: phi_j(t) = P_{j-1}(s) with
/// s = 2(t - t_start)/k - 1, j = 1..q+1. Trial and test spaces coincide.
class TimeSlabBasis {
  public:
    TimeSlabBasis(TimeSlab slab, int degree) : slab_(slab), degree_(degree) {
        if (degree < 2 || degree > 12) throw std::invalid_argument("time degree must be in 2..12");
        if (!(slab.t_end > slab.t_start)) throw std::invalid_argument("slab must have positive length");
    }

    const TimeSlab& slab() const { return slab_; }
    int degree() const { return degree_; }
    std::size_t size() const { return static_cast<std::size_t>(degree_) + 1; }

    /// phi_j, its first or second time derivative, at time t.
    double eval(int j, double t, int derivative = 0) const {
        check_index(j);
        if (derivative < 0 || derivative > 2) throw std::out_of_range("derivative order must be 0..2");
        const double k = slab_.length();
        const double s = 2.0 * (t - slab_.t_start) / k - 1.0;
        const std::array<double, 3> p = legendre_upto2(j - 1, s);
        const double scale = 2.0 / k;
        if (derivative == 0) return p[0];
        if (derivative == 1) return p[1] * scale;
        return p[2] * scale * scale;
    }

    /// Trace values at the slab endpoints (exact closed forms).
    double right_value(int j) const {
        check_index(j);
        return 1.0;
    }
    double left_value(int j) const {
        check_index(j);
        return (j % 2 == 1) ? 1.0 : -1.0;
    }
    double right_derivative(int j) const {
        check_index(j);
        return static_cast<double>(j) * (j - 1) / slab_.length();
    }
    double left_derivative(int j) const {
        check_index(j);
        const double v = static_cast<double>(j) * (j - 1) / slab_.length();
        return (j % 2 == 0) ? v : -v;
    }

    /// Integral over the slab of a product of up to four basis factors.
    /// Factors are sorted canonically first, so the result is bit-for-bit
    /// invariant under permutation of the arguments. Values are memoized per
    /// basis instance (the Picard loop requests the same nonlinear tensors on
    /// every pass); the cache makes this method non-reentrant across threads.
    double product_integral(std::vector<BasisFactor> factors) const {
        if (factors.empty() || factors.size() > 4)
            throw std::invalid_argument("product integral takes 1..4 factors");
        for (const BasisFactor& f : factors) {
            check_index(f.index);
            if (f.derivative < 0 || f.derivative > 2)
                throw std::out_of_range("derivative order must be 0..2");
        }
        std::sort(factors.begin(), factors.end(), [](const BasisFactor& a, const BasisFactor& b) {
            return a.index != b.index ? a.index < b.index : a.derivative < b.derivative;
        });

        std::uint32_t key = 0;
        for (const BasisFactor& f : factors)
            key = key * 64u + static_cast<std::uint32_t>(3 * f.index + f.derivative);
        if (const auto hit = integral_cache_.find(key); hit != integral_cache_.end())
            return hit->second;

        const QuadratureRule rule = gauss_legendre(2 * static_cast<std::size_t>(degree_) + 2);
        const double k = slab_.length();
        double sum = 0.0;
        for (std::size_t qp = 0; qp < rule.size(); ++qp) {
            const double t = slab_.t_start + 0.5 * (rule.nodes[qp] + 1.0) * k;
            double prod = rule.weights[qp] * 0.5 * k;
            for (const BasisFactor& f : factors) prod *= eval(f.index, t, f.derivative);
            sum += prod;
        }
        integral_cache_.emplace(key, sum);
        return sum;
    }

  private:
    void check_index(int j) const {
        if (j < 1 || j > degree_ + 1) throw std::out_of_range("basis index outside 1..q+1");
    }

    // P_n(s) with first and second s-derivatives via the differentiated
    // three-term recurrence.
    static std::array<double, 3> legendre_upto2(int n, double s) {
        double p0 = 1.0, d0 = 0.0, dd0 = 0.0;
        if (n == 0) return {p0, d0, dd0};
        double p1 = s, d1 = 1.0, dd1 = 0.0;
        for (int m = 1; m < n; ++m) {
            const double a = (2.0 * m + 1.0) / (m + 1.0);
            const double b = static_cast<double>(m) / (m + 1.0);
            const double p2 = a * s * p1 - b * p0;
            const double d2 = a * (p1 + s * d1) - b * d0;
            const double dd2 = a * (2.0 * d1 + s * dd1) - b * dd0;
            p0 = p1; d0 = d1; dd0 = dd1;
            p1 = p2; d1 = d2; dd1 = dd2;
        }
        return {p1, d1, dd1};
    }

    TimeSlab slab_;
    int degree_;
    // Keyed by the canonical factor list packed 6 bits per factor.
    mutable std::unordered_map<std::uint32_t, double> integral_cache_;
};

} // namespace dgwave
