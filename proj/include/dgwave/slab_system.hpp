#pragma once

#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dgwave/dense_matrix.hpp"
#include "dgwave/errors.hpp"
#include "dgwave/time_basis.hpp"

namespace dgwave {

/// One separable term c * phi_a(t) phi_b(t) * K_ab of the Picard-frozen
/// stiffness K(t); terms are stored with a <= b and c carrying the
/// symmetry factor (1 on the diagonal, 2 off it).
struct PicardStiffnessTerm {
    double coefficient = 1.0;
    int a = 1;
    int b = 1;
    DenseMatrix spatial;
};

/// Separable expansion of the stiffness operator over one slab.
struct PicardStiffness {
    std::size_t dof_count = 0;
    std::vector<PicardStiffnessTerm> terms;

    /// K at the slab start (limit from above); phi_a(t+) phi_b(t+) = (-1)^{a+b}.
    DenseMatrix at_left() const {
        DenseMatrix k(dof_count, dof_count);
        for (const PicardStiffnessTerm& term : terms) {
            const double sign = ((term.a + term.b) % 2 == 0) ? 1.0 : -1.0;
            DenseMatrix scaled = term.spatial;
            scaled *= term.coefficient * sign;
            k += scaled;
        }
        return k;
    }

    /// K at the slab end; all right traces equal one.
    DenseMatrix at_right() const {
        DenseMatrix k(dof_count, dof_count);
        for (const PicardStiffnessTerm& term : terms) {
            DenseMatrix scaled = term.spatial;
            scaled *= term.coefficient;
            k += scaled;
        }
        return k;
    }

    /// Time-independent stiffness: a single phi_1 phi_1 term.
    static PicardStiffness constant(DenseMatrix k) {
        PicardStiffness ks;
        ks.dof_count = k.rows();
        ks.terms.push_back({1.0, 1, 1, std::move(k)});
        return ks;
    }

    static PicardStiffness zero(std::size_t dof_count) {
        PicardStiffness ks;
        ks.dof_count = dof_count;
        return ks;
    }
};

/// Data entering a slab from the left: end state of the previous slab (or
/// the initial data) plus the stiffness matrix used in the incoming flux.
struct SlabTraces {
    Vector z_in;
    Vector zdot_in;
    DenseMatrix k_in;
};

/// The five temporal coupling matrices; row l is the test index, column j
/// the trial index, both 1-based in the formulas and 0-based in storage.
struct TimeMatrices {
    DenseMatrix m1; // \int phi_j'' phi_l'
    DenseMatrix m2; // \int phi_j'  phi_l'
    DenseMatrix m3; // \int phi_j   phi_l'
    DenseMatrix m4; // phi_j'(t+) phi_l'(t+)
    DenseMatrix m5; // phi_j(t+)  phi_l(t+)
};

inline TimeMatrices time_matrices(const TimeSlabBasis& basis) {
    const int n = static_cast<int>(basis.size());
    TimeMatrices tm{DenseMatrix(n, n), DenseMatrix(n, n), DenseMatrix(n, n),
                    DenseMatrix(n, n), DenseMatrix(n, n)};
    for (int l = 1; l <= n; ++l) {
        for (int j = 1; j <= n; ++j) {
            tm.m1(l - 1, j - 1) = basis.product_integral({{j, 2}, {l, 1}});
            tm.m2(l - 1, j - 1) = basis.product_integral({{j, 1}, {l, 1}});
            tm.m3(l - 1, j - 1) = basis.product_integral({{j, 0}, {l, 1}});
            tm.m4(l - 1, j - 1) = basis.left_derivative(j) * basis.left_derivative(l);
            tm.m5(l - 1, j - 1) = basis.left_value(j) * basis.left_value(l);
        }
    }
    return tm;
}

/// Quadruple-product tensors of the separable stiffness terms, expanded to
/// the full slab dimension D = dof_count*(q+1) in spatial-major ordering.
struct NonlinearTimeMatrices {
    DenseMatrix m3_full; // sum_ab c (K_ab)_{m'm} \int phi_a phi_b phi_j phi_l'
    DenseMatrix m5_full; // K(t+)_{m'm} phi_j(t+) phi_l(t+)
};

inline NonlinearTimeMatrices assemble_nonlinear_time_matrices(const TimeSlabBasis& basis,
                                                              const PicardStiffness& ks) {
    const std::size_t n = basis.size();
    const std::size_t dhat = ks.dof_count;
    const std::size_t dim = dhat * n;
    NonlinearTimeMatrices nt{DenseMatrix(dim, dim), DenseMatrix(dim, dim)};

    for (const PicardStiffnessTerm& term : ks.terms) {
        if (term.spatial.rows() != dhat || term.spatial.cols() != dhat)
            throw DimensionMismatch("stiffness term dimension");
        DenseMatrix tensor(n, n);
        for (int l = 1; l <= static_cast<int>(n); ++l)
            for (int j = 1; j <= static_cast<int>(n); ++j)
                tensor(l - 1, j - 1) =
                    basis.product_integral({{term.a, 0}, {term.b, 0}, {j, 0}, {l, 1}});
        for (std::size_t mr = 0; mr < dhat; ++mr) {
            for (std::size_t mc = 0; mc < dhat; ++mc) {
                const double kv = term.coefficient * term.spatial(mr, mc);
                if (kv == 0.0) continue;
                for (std::size_t l = 0; l < n; ++l)
                    for (std::size_t j = 0; j < n; ++j)
                        nt.m3_full(mr * n + l, mc * n + j) += kv * tensor(l, j);
            }
        }
    }

    const DenseMatrix k_left = ks.at_left();
    for (std::size_t mr = 0; mr < dhat; ++mr) {
        for (std::size_t mc = 0; mc < dhat; ++mc) {
            const double kv = k_left(mr, mc);
            if (kv == 0.0) continue;
            for (int l = 1; l <= static_cast<int>(n); ++l)
                for (int j = 1; j <= static_cast<int>(n); ++j)
                    nt.m5_full(mr * n + (l - 1), mc * n + (j - 1)) +=
                        kv * basis.left_value(j) * basis.left_value(l);
        }
    }
    return nt;
}

/// Full slab operator in spatial-major ordering,
///   A = mass (x) (M1 + M4 + 2 gamma M2 + gamma^2 (M3 + M5)) + M3~ + M5~.
/// `spatial_mass` is the identity in transformed coordinates; passing the
/// finite element mass matrix instead assembles the untransformed system.
inline DenseMatrix assemble_block_A(const TimeSlabBasis& basis, double gamma,
                                    const PicardStiffness& ks, const DenseMatrix& spatial_mass) {
    const std::size_t n = basis.size();
    const std::size_t dhat = ks.dof_count;
    if (spatial_mass.rows() != dhat || spatial_mass.cols() != dhat)
        throw DimensionMismatch("spatial mass dimension");

    const TimeMatrices tm = time_matrices(basis);
    DenseMatrix scalar_block = tm.m1;
    scalar_block += tm.m4;
    {
        DenseMatrix damped = tm.m2;
        damped *= 2.0 * gamma;
        scalar_block += damped;
    }
    {
        DenseMatrix react = tm.m3;
        react += tm.m5;
        react *= gamma * gamma;
        scalar_block += react;
    }

    NonlinearTimeMatrices nt = assemble_nonlinear_time_matrices(basis, ks);
    DenseMatrix a = std::move(nt.m3_full);
    a += nt.m5_full;
    for (std::size_t mr = 0; mr < dhat; ++mr) {
        for (std::size_t mc = 0; mc < dhat; ++mc) {
            const double mass = spatial_mass(mr, mc);
            if (mass == 0.0) continue;
            for (std::size_t l = 0; l < n; ++l)
                for (std::size_t j = 0; j < n; ++j)
                    a(mr * n + l, mc * n + j) += mass * scalar_block(l, j);
        }
    }
    return a;
}

inline DenseMatrix assemble_block_A(const TimeSlabBasis& basis, double gamma,
                                    const PicardStiffness& ks) {
    return assemble_block_A(basis, gamma, ks, DenseMatrix::identity(ks.dof_count));
}

/// Right-hand side in transformed coordinates,
///   b_m^j = \int G_m phi_j' + zdot_in[m] phi_j'(t+)
///         + (gamma^2 z_in[m] + (K_in z_in)[m]) phi_j(t+).
/// `g` maps a time to the transformed load vector of length dof_count.
template <class G>
Vector assemble_rhs(const TimeSlabBasis& basis, double gamma, const SlabTraces& traces, G&& g,
                    std::size_t quad_points) {
    const std::size_t n = basis.size();
    const std::size_t dhat = traces.z_in.size();
    if (traces.zdot_in.size() != dhat) throw DimensionMismatch("incoming velocity length");
    if (traces.k_in.rows() != dhat || traces.k_in.cols() != dhat)
        throw DimensionMismatch("incoming stiffness dimension");
    if (quad_points < n + 1)
        throw std::invalid_argument("rhs quadrature needs at least q+2 points");

    Vector b(dhat * n, 0.0);
    const QuadratureRule rule = gauss_legendre(quad_points);
    const TimeSlab& slab = basis.slab();
    const double k = slab.length();
    for (std::size_t qp = 0; qp < rule.size(); ++qp) {
        const double t = slab.t_start + 0.5 * (rule.nodes[qp] + 1.0) * k;
        const Vector gv = g(t);
        if (gv.size() != dhat) throw DimensionMismatch("load vector length");
        for (std::size_t j = 0; j < n; ++j) {
            const double w = rule.weights[qp] * 0.5 * k * basis.eval(static_cast<int>(j) + 1, t, 1);
            for (std::size_t m = 0; m < dhat; ++m) b[m * n + j] += w * gv[m];
        }
    }

    const Vector flux = traces.k_in * traces.z_in;
    for (std::size_t j = 0; j < n; ++j) {
        const double dval = basis.left_derivative(static_cast<int>(j) + 1);
        const double val = basis.left_value(static_cast<int>(j) + 1);
        for (std::size_t m = 0; m < dhat; ++m)
            b[m * n + j] += traces.zdot_in[m] * dval +
                            (gamma * gamma * traces.z_in[m] + flux[m]) * val;
    }
    return b;
}

struct SlabSystem {
    DenseMatrix a;
    Vector b;
};

/// Solution coefficients on one slab: row m = spatial dof, column j = basis
/// index. Evaluation is exact at any time, including the slab endpoints.
struct SlabSolution {
    TimeSlabBasis basis;
    DenseMatrix coefficients;

    Vector value_at(double t, int derivative = 0) const {
        const std::size_t n = basis.size();
        Vector phi(n);
        for (std::size_t j = 0; j < n; ++j)
            phi[j] = basis.eval(static_cast<int>(j) + 1, t, derivative);
        return weighted_sum(phi);
    }

    Vector right_value() const { return trace(&TimeSlabBasis::right_value); }
    Vector right_derivative() const { return trace(&TimeSlabBasis::right_derivative); }
    Vector left_value() const { return trace(&TimeSlabBasis::left_value); }
    Vector left_derivative() const { return trace(&TimeSlabBasis::left_derivative); }

  private:
    Vector trace(double (TimeSlabBasis::*f)(int) const) const {
        const std::size_t n = basis.size();
        Vector phi(n);
        for (std::size_t j = 0; j < n; ++j) phi[j] = (basis.*f)(static_cast<int>(j) + 1);
        return weighted_sum(phi);
    }

    Vector weighted_sum(const Vector& phi) const {
        const std::size_t n = basis.size();
        Vector out(coefficients.rows(), 0.0);
        for (std::size_t m = 0; m < out.size(); ++m) {
            double sum = 0.0;
            for (std::size_t j = 0; j < n; ++j) sum += coefficients(m, j) * phi[j];
            out[m] = sum;
        }
        return out;
    }
};

/// Flat slab vector -> per-dof coefficient matrix (spatial-major ordering).
inline DenseMatrix unpack_coefficients(const TimeSlabBasis& basis, const Vector& z) {
    const std::size_t n = basis.size();
    if (z.size() % n != 0) throw DimensionMismatch("slab vector length");
    const std::size_t dhat = z.size() / n;
    DenseMatrix coef(dhat, n);
    for (std::size_t m = 0; m < dhat; ++m)
        for (std::size_t j = 0; j < n; ++j) coef(m, j) = z[m * n + j];
    return coef;
}

inline Vector pack_coefficients(const DenseMatrix& coef) {
    Vector z(coef.rows() * coef.cols());
    for (std::size_t m = 0; m < coef.rows(); ++m)
        for (std::size_t j = 0; j < coef.cols(); ++j) z[m * coef.cols() + j] = coef(m, j);
    return z;
}

inline SlabSolution solve_slab(const TimeSlabBasis& basis, const SlabSystem& system) {
    if (system.a.rows() != system.b.size()) throw DimensionMismatch("system dimensions");
    const Vector z = lu_solve(system.a, system.b);
    return SlabSolution{basis, unpack_coefficients(basis, z)};
}

} // namespace dgwave
