#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "dgwave/dense_matrix.hpp"
#include "dgwave/errors.hpp"
#include "dgwave/quadrature.hpp"

namespace dgwave {

/// Uniform continuous-Galerkin space of degree p on (0,1) with homogeneous
/// Dirichlet conditions. The two boundary nodes are eliminated, leaving
/// n_elements*p - 1 interior degrees of freedom; Lagrange nodes are
/// equispaced within each element.
class FemSpace1D {
  public:
    FemSpace1D(std::size_t n_elements, int degree)
        : n_elements_(n_elements), degree_(degree) {
        if (n_elements < 2) throw std::invalid_argument("need at least two elements");
        if (degree < 1 || degree > 8) throw std::invalid_argument("spatial degree must be in 1..8");
        h_ = 1.0 / static_cast<double>(n_elements);
        const std::size_t n_nodes = n_elements * static_cast<std::size_t>(degree) + 1;
        nodes_.resize(n_nodes);
        for (std::size_t g = 0; g < n_nodes; ++g)
            nodes_[g] = static_cast<double>(g) * h_ / static_cast<double>(degree);
    }

    std::size_t n_elements() const { return n_elements_; }
    int degree() const { return degree_; }
    double element_length() const { return h_; }

    /// Interior dof count (boundary nodes at x = 0 and x = 1 removed).
    std::size_t dof_count() const { return n_elements_ * static_cast<std::size_t>(degree_) - 1; }

    /// Coordinates of all mesh nodes, boundary included.
    const Vector& node_coordinates() const { return nodes_; }

    /// Coordinates of the interior Lagrange nodes only.
    Vector interior_node_coordinates() const {
        return Vector(nodes_.begin() + 1, nodes_.end() - 1);
    }

    /// Interior dof index of local node `local` on element `element`, or
    /// nullopt for the two eliminated boundary nodes.
    std::optional<std::size_t> dof_index(std::size_t element, int local) const {
        const std::size_t global = element * static_cast<std::size_t>(degree_) + static_cast<std::size_t>(local);
        if (global == 0 || global == n_elements_ * static_cast<std::size_t>(degree_)) return std::nullopt;
        return global - 1;
    }

    /// Values of the p+1 reference shape functions at xi in [0,1].
    Vector shape_values(double xi) const {
        const int p = degree_;
        Vector vals(p + 1);
        for (int i = 0; i <= p; ++i) {
            double v = 1.0;
            for (int j = 0; j <= p; ++j) {
                if (j == i) continue;
                v *= (xi * p - j) / static_cast<double>(i - j);
            }
            vals[i] = v;
        }
        return vals;
    }

    /// Reference-coordinate derivatives of the shape functions at xi.
    Vector shape_derivatives(double xi) const {
        const int p = degree_;
        Vector ders(p + 1, 0.0);
        for (int i = 0; i <= p; ++i) {
            double sum = 0.0;
            for (int m = 0; m <= p; ++m) {
                if (m == i) continue;
                double prod = 1.0;
                for (int j = 0; j <= p; ++j) {
                    if (j == i || j == m) continue;
                    prod *= (xi * p - j) / static_cast<double>(i - j);
                }
                sum += prod * p / static_cast<double>(i - m);
            }
            ders[i] = sum;
        }
        return ders;
    }

    bool operator==(const FemSpace1D& other) const {
        return n_elements_ == other.n_elements_ && degree_ == other.degree_;
    }

  private:
    std::size_t n_elements_;
    int degree_;
    double h_ = 0.0;
    Vector nodes_;
};

/// Coefficients of a function in a FemSpace1D, interior nodal values only.
/// The represented function vanishes at x = 0 and x = 1 by construction.
struct SpatialFunction {
    const FemSpace1D* space = nullptr;
    Vector coefficients;
};

namespace detail {

inline void require_same_space(const FemSpace1D& space, const SpatialFunction& w) {
    if (w.space == nullptr || !(*w.space == space))
        throw SpaceMismatch("spatial function lives on a different space");
    if (w.coefficients.size() != space.dof_count())
        throw DimensionMismatch("spatial coefficient length");
}

// Local coefficient gather: boundary slots read as zero.
inline Vector local_coefficients(const FemSpace1D& space, const SpatialFunction& w,
                                 std::size_t element) {
    const int p = space.degree();
    Vector local(p + 1, 0.0);
    for (int i = 0; i <= p; ++i)
        if (auto dof = space.dof_index(element, i)) local[i] = w.coefficients[*dof];
    return local;
}

} // namespace detail

/// Mass matrix, entry (i,j) = integral of psi_i * psi_j over (0,1).
inline DenseMatrix assemble_mass(const FemSpace1D& space) {
    const int p = space.degree();
    const QuadratureRule rule = gauss_legendre(static_cast<std::size_t>(p + 2));
    const double h = space.element_length();

    DenseMatrix m(space.dof_count(), space.dof_count());
    for (std::size_t e = 0; e < space.n_elements(); ++e) {
        for (std::size_t qp = 0; qp < rule.size(); ++qp) {
            const double xi = 0.5 * (rule.nodes[qp] + 1.0);
            const double w = rule.weights[qp] * 0.5 * h;
            const Vector n = space.shape_values(xi);
            for (int a = 0; a <= p; ++a) {
                const auto ia = space.dof_index(e, a);
                if (!ia) continue;
                for (int b = 0; b <= p; ++b) {
                    const auto ib = space.dof_index(e, b);
                    if (!ib) continue;
                    m(*ia, *ib) += w * n[a] * n[b];
                }
            }
        }
    }
    return m;
}

/// Stiffness matrix weighted by the squared gradient of two functions:
/// entry (i,j) = integral of (wa')(wb') psi_i' psi_j'. Bilinear in (wa, wb);
/// the diagonal case wa == wb is the Picard-frozen nonlinear stiffness.
inline DenseMatrix assemble_cross_stiffness(const FemSpace1D& space, const SpatialFunction& wa,
                                            const SpatialFunction& wb) {
    detail::require_same_space(space, wa);
    detail::require_same_space(space, wb);

    const int p = space.degree();
    const std::size_t quad_points = static_cast<std::size_t>(2 * p + 1);
    const QuadratureRule rule = gauss_legendre(quad_points);
    const double h = space.element_length();
    const double inv_h = 1.0 / h;

    DenseMatrix k(space.dof_count(), space.dof_count());
    for (std::size_t e = 0; e < space.n_elements(); ++e) {
        const Vector ca = detail::local_coefficients(space, wa, e);
        const Vector cb = detail::local_coefficients(space, wb, e);
        for (std::size_t qp = 0; qp < rule.size(); ++qp) {
            const double xi = 0.5 * (rule.nodes[qp] + 1.0);
            const double w = rule.weights[qp] * 0.5 * h;
            const Vector d = space.shape_derivatives(xi);
            double grad_a = 0.0, grad_b = 0.0;
            for (int i = 0; i <= p; ++i) {
                grad_a += ca[i] * d[i];
                grad_b += cb[i] * d[i];
            }
            grad_a *= inv_h;
            grad_b *= inv_h;
            const double weight = w * grad_a * grad_b;
            for (int a = 0; a <= p; ++a) {
                const auto ia = space.dof_index(e, a);
                if (!ia) continue;
                for (int b = 0; b <= p; ++b) {
                    const auto ib = space.dof_index(e, b);
                    if (!ib) continue;
                    k(*ia, *ib) += weight * (d[a] * inv_h) * (d[b] * inv_h);
                }
            }
        }
    }
    return k;
}

/// Stiffness weighted by (w')^2; symmetric positive semi-definite.
inline DenseMatrix assemble_weighted_stiffness(const FemSpace1D& space, const SpatialFunction& w) {
    return assemble_cross_stiffness(space, w, w);
}

/// Load vector F_i = integral of f * psi_i by per-element Gauss quadrature.
template <class F>
Vector assemble_load(const FemSpace1D& space, F&& f, std::size_t quad_points) {
    const int p = space.degree();
    if (quad_points < static_cast<std::size_t>(p + 1))
        throw std::invalid_argument("load quadrature needs at least p+1 points");
    const QuadratureRule rule = gauss_legendre(quad_points);
    const double h = space.element_length();

    Vector load(space.dof_count(), 0.0);
    for (std::size_t e = 0; e < space.n_elements(); ++e) {
        const double x_left = static_cast<double>(e) * h;
        for (std::size_t qp = 0; qp < rule.size(); ++qp) {
            const double xi = 0.5 * (rule.nodes[qp] + 1.0);
            const double x = x_left + xi * h;
            const double w = rule.weights[qp] * 0.5 * h * f(x);
            const Vector n = space.shape_values(xi);
            for (int a = 0; a <= p; ++a)
                if (auto ia = space.dof_index(e, a)) load[*ia] += w * n[a];
        }
    }
    return load;
}

/// Nodal interpolant: coefficients are g evaluated at the interior nodes.
template <class G>
SpatialFunction interpolate(const FemSpace1D& space, G&& g) {
    SpatialFunction w;
    w.space = &space;
    const Vector xs = space.interior_node_coordinates();
    w.coefficients.resize(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) w.coefficients[i] = g(xs[i]);
    return w;
}

/// Point evaluation of a spatial function; zero at the domain boundary.
inline double evaluate(const SpatialFunction& w, double x) {
    if (w.space == nullptr) throw SpaceMismatch("spatial function has no space");
    if (x < 0.0 || x > 1.0) throw std::out_of_range("evaluation point outside (0,1)");
    const FemSpace1D& space = *w.space;
    const double h = space.element_length();
    std::size_t e = static_cast<std::size_t>(x / h);
    if (e >= space.n_elements()) e = space.n_elements() - 1;
    const double xi = (x - static_cast<double>(e) * h) / h;
    const Vector local = detail::local_coefficients(space, w, e);
    const Vector n = space.shape_values(xi);
    double v = 0.0;
    for (std::size_t i = 0; i < n.size(); ++i) v += local[i] * n[i];
    return v;
}

/// L2 norm of (w - g) over (0,1) by per-element Gauss quadrature.
template <class G>
double l2_norm_of_difference(const FemSpace1D& space, const SpatialFunction& w, G&& g,
                             std::size_t quad_points) {
    detail::require_same_space(space, w);
    const int p = space.degree();
    if (quad_points < static_cast<std::size_t>(p + 2))
        throw std::invalid_argument("norm quadrature needs at least p+2 points");
    const QuadratureRule rule = gauss_legendre(quad_points);
    const double h = space.element_length();

    double sum = 0.0;
    for (std::size_t e = 0; e < space.n_elements(); ++e) {
        const double x_left = static_cast<double>(e) * h;
        const Vector local = detail::local_coefficients(space, w, e);
        for (std::size_t qp = 0; qp < rule.size(); ++qp) {
            const double xi = 0.5 * (rule.nodes[qp] + 1.0);
            const double x = x_left + xi * h;
            const Vector n = space.shape_values(xi);
            double wh = 0.0;
            for (std::size_t i = 0; i < n.size(); ++i) wh += local[i] * n[i];
            const double diff = wh - g(x);
            sum += rule.weights[qp] * 0.5 * h * diff * diff;
        }
    }
    return std::sqrt(sum);
}

} // namespace dgwave
