#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dgwave/dense_matrix.hpp"
#include "dgwave/errors.hpp"
#include "dgwave/fem_space.hpp"
#include "dgwave/slab_system.hpp"
#include "dgwave/time_basis.hpp"

namespace dgwave {

struct SolverConfig {
    double gamma = 1.0;
    double final_time = 1.0;
    int space_degree = 2;
    int time_degree = 2;
    std::size_t n_elements = 4;
    std::size_t n_slabs = 16;
    double picard_tol = 1e-10;
    std::size_t picard_max = 30;
    // Relaxation weight for the stiffness refresh between passes. The plain
    // refresh (1.0) is neutrally stable for q >= 3 at coarse steps: the
    // linearized update map has an eigenvalue near -1 and the iterates
    // oscillate without settling. Averaging with the previous expansion
    // shifts that eigenvalue towards 0 and restores fast contraction, while
    // converging to the same fixed point (any fixed point of the damped map
    // is one of the plain map and vice versa).
    double picard_damping = 0.5;
    std::size_t load_quad_points = 0; // 0 -> 2p+3
    std::size_t time_quad_points = 0; // 0 -> q+4

    double slab_length() const { return final_time / static_cast<double>(n_slabs); }
    std::size_t effective_load_quad(int p) const {
        return load_quad_points ? load_quad_points : static_cast<std::size_t>(2 * p + 3);
    }
    std::size_t effective_time_quad(int q) const {
        return time_quad_points ? time_quad_points : static_cast<std::size_t>(q + 4);
    }
};

/// Problem data on (0,1) x (0,T]; forcing, initial displacement and initial
/// velocity are required, the exact pair is optional and only consulted by
/// error evaluation.
struct Problem {
    std::function<double(double, double)> forcing;          // f(x, t)
    std::function<double(double)> initial_displacement;     // u(x, 0)
    std::function<double(double)> initial_velocity;         // u_t(x, 0)
    std::function<double(double, double)> exact_solution;   // u(x, t)
    std::function<double(double, double)> exact_velocity;   // u_t(x, t)
};

struct SlabStats {
    std::size_t iterations = 0; // total passes run
    double residual = 0.0;      // last relative coefficient change
    bool converged = false;     // reached the configured tolerance
    bool stalled = false;       // exited at the rounding floor instead
    std::vector<double> residual_history;

    /// First pass whose relative change dropped to tol, or 0 if none did.
    std::size_t iterations_to(double tol) const {
        for (std::size_t i = 0; i < residual_history.size(); ++i)
            if (residual_history[i] <= tol) return i + 1;
        return 0;
    }
};

/// March output: transformed slab solutions plus the fixed spatial data
/// needed to map them back to nodal values.
struct Trajectory {
    SolverConfig config;
    FemSpace1D space;
    DenseMatrix mass;
    DenseMatrix mass_sqrt;
    DenseMatrix mass_inv_sqrt;
    Vector z0;
    Vector zdot0;
    DenseMatrix k_incoming; // K at the latest slab end, transformed coordinates
    std::vector<SlabSolution> slabs;
    std::vector<SlabStats> stats;

    bool all_converged() const {
        for (const SlabStats& s : stats)
            if (!s.converged) return false;
        return true;
    }
};

namespace detail {

inline Vector matrix_column(const DenseMatrix& m, std::size_t col) {
    Vector v(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) v[r] = m(r, col);
    return v;
}

// (1/3) M^{-1/2} cross_stiffness(wa, wb) M^{-1/2} in transformed coordinates.
inline DenseMatrix transformed_cross_stiffness(const FemSpace1D& space,
                                               const DenseMatrix& mass_inv_sqrt,
                                               const SpatialFunction& wa,
                                               const SpatialFunction& wb) {
    DenseMatrix k = assemble_cross_stiffness(space, wa, wb);
    k = mass_inv_sqrt * k * mass_inv_sqrt;
    k *= 1.0 / 3.0;
    return k;
}

inline SpatialFunction nodal_from_transformed(const FemSpace1D& space,
                                              const DenseMatrix& mass_inv_sqrt, const Vector& z) {
    SpatialFunction w;
    w.space = &space;
    w.coefficients = mass_inv_sqrt * z;
    return w;
}

// (1 - theta) * old + theta * fresh, merged per (a, b) pair so the blended
// expansion stays in the same separable form.
inline PicardStiffness blend_stiffness(const PicardStiffness& old_ks, const PicardStiffness& fresh,
                                       double theta) {
    if (theta == 1.0) return fresh;
    std::map<std::pair<int, int>, DenseMatrix> acc;
    const auto add = [&acc](const PicardStiffness& ks, double w) {
        for (const PicardStiffnessTerm& t : ks.terms) {
            DenseMatrix m = t.spatial;
            m *= w * t.coefficient;
            const auto key = std::make_pair(t.a, t.b);
            if (const auto it = acc.find(key); it == acc.end())
                acc.emplace(key, std::move(m));
            else
                it->second += m;
        }
    };
    add(old_ks, 1.0 - theta);
    add(fresh, theta);

    PicardStiffness out;
    out.dof_count = fresh.dof_count;
    for (auto& [key, m] : acc) out.terms.push_back({1.0, key.first, key.second, std::move(m)});
    return out;
}

} // namespace detail

/// Separable stiffness expansion frozen at a slab iterate: with
/// w_a = M^{-1/2} alpha_a, the terms are c_ab phi_a phi_b K_ab, a <= b,
/// K_ab = (1/3) M^{-1/2} cross_stiffness(w_a, w_b) M^{-1/2}.
inline PicardStiffness build_picard_stiffness(const FemSpace1D& space,
                                              const DenseMatrix& mass_inv_sqrt,
                                              const SlabSolution& sol) {
    const std::size_t n = sol.basis.size();
    std::vector<SpatialFunction> w(n);
    for (std::size_t a = 0; a < n; ++a)
        w[a] = detail::nodal_from_transformed(space, mass_inv_sqrt,
                                              detail::matrix_column(sol.coefficients, a));

    PicardStiffness ks;
    ks.dof_count = space.dof_count();
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a; b < n; ++b) {
            DenseMatrix kab =
                detail::transformed_cross_stiffness(space, mass_inv_sqrt, w[a], w[b]);
            ks.terms.push_back({a == b ? 1.0 : 2.0, static_cast<int>(a) + 1,
                                static_cast<int>(b) + 1, std::move(kab)});
        }
    }
    return ks;
}

/// Build the spatial objects and the transformed initial state; no slabs yet.
inline Trajectory initialize(const SolverConfig& config, const Problem& problem) {
    if (!(config.final_time > 0.0)) throw std::invalid_argument("final time must be positive");
    if (config.n_slabs == 0) throw std::invalid_argument("need at least one slab");
    if (!(config.picard_tol > 0.0)) throw std::invalid_argument("picard tolerance must be positive");
    if (config.picard_max == 0) throw std::invalid_argument("picard iteration cap must be positive");
    if (!(config.picard_damping > 0.0) || config.picard_damping > 1.0)
        throw std::invalid_argument("picard damping must lie in (0, 1]");
    if (!problem.forcing || !problem.initial_displacement || !problem.initial_velocity)
        throw std::invalid_argument("problem data is incomplete");
    for (double x : {0.0, 1.0}) {
        if (std::abs(problem.initial_displacement(x)) > 1e-10 ||
            std::abs(problem.initial_velocity(x)) > 1e-10)
            throw std::invalid_argument("initial data must vanish on the boundary");
    }

    FemSpace1D space(config.n_elements, config.space_degree);
    DenseMatrix mass = assemble_mass(space);
    DenseMatrix mass_sqrt = spd_sqrt(mass);
    DenseMatrix mass_inv_sqrt = spd_inv_sqrt(mass);

    SpatialFunction u0 = interpolate(space, problem.initial_displacement);
    SpatialFunction u1 = interpolate(space, problem.initial_velocity);

    Trajectory traj{config,
                    std::move(space),
                    std::move(mass),
                    std::move(mass_sqrt),
                    std::move(mass_inv_sqrt),
                    {},
                    {},
                    DenseMatrix(0, 0),
                    {},
                    {}};
    traj.z0 = traj.mass_sqrt * u0.coefficients;
    traj.zdot0 = traj.mass_sqrt * u1.coefficients;
    traj.k_incoming =
        detail::transformed_cross_stiffness(traj.space, traj.mass_inv_sqrt, u0, u0);
    return traj;
}

/// Solve the next slab with Picard iteration and append it. The stiffness is
/// warm-started as constant in time from the incoming state; passing
/// refresh_stiffness = false keeps that frozen stiffness for every pass,
/// which makes the march linear.
inline const SlabSolution& march_slab(Trajectory& traj, const Problem& problem,
                                      bool refresh_stiffness = true) {
    const SolverConfig& config = traj.config;
    const std::size_t index = traj.slabs.size() + 1;
    if (index > config.n_slabs) throw std::out_of_range("all slabs already marched");
    const double k = config.slab_length();
    const TimeSlab slab{index, static_cast<double>(index - 1) * k, static_cast<double>(index) * k};
    const TimeSlabBasis basis(slab, config.time_degree);

    SlabTraces traces;
    if (traj.slabs.empty()) {
        traces.z_in = traj.z0;
        traces.zdot_in = traj.zdot0;
    } else {
        traces.z_in = traj.slabs.back().right_value();
        traces.zdot_in = traj.slabs.back().right_derivative();
    }
    traces.k_in = traj.k_incoming;

    const std::size_t load_quad = config.effective_load_quad(config.space_degree);
    auto g = [&](double t) {
        Vector f = assemble_load(traj.space, [&](double x) { return problem.forcing(x, t); },
                                 load_quad);
        return traj.mass_inv_sqrt * f;
    };
    const Vector b =
        assemble_rhs(basis, config.gamma, traces, g, config.effective_time_quad(config.time_degree));

    PicardStiffness ks = PicardStiffness::constant(traj.k_incoming);
    SlabStats stats;
    Vector z_old(traj.space.dof_count() * basis.size(), 0.0);
    SlabSolution sol{basis, DenseMatrix(0, 0)};
    // The relative change cannot settle below the rounding floor of the slab
    // solve; once it stops improving down there, further passes only re-toss
    // the same noise. The exit needs two consecutive non-improvements (a
    // complex contraction mode can lift the residual once while its envelope
    // still decays) and only arms deep enough that it cannot preempt a loop
    // that is merely converging slowly.
    const double stall_guard = std::max(100.0 * config.picard_tol, 1e-12);
    for (std::size_t pass = 1; pass <= config.picard_max; ++pass) {
        const DenseMatrix a = assemble_block_A(basis, config.gamma, ks);
        const Vector z = lu_solve(a, b);
        Vector diff = z;
        for (std::size_t i = 0; i < z.size(); ++i) diff[i] -= z_old[i];
        const double residual = max_abs(diff) / (1.0 + max_abs(z));
        stats.iterations = pass;
        stats.residual = residual;
        stats.residual_history.push_back(residual);
        sol.coefficients = unpack_coefficients(basis, z);
        if (residual <= config.picard_tol) {
            stats.converged = true;
            break;
        }
        const std::size_t h = stats.residual_history.size();
        if (pass >= 4 && residual <= stall_guard &&
            stats.residual_history[h - 1] >= stats.residual_history[h - 2] &&
            stats.residual_history[h - 2] >= stats.residual_history[h - 3]) {
            stats.stalled = true;
            break;
        }
        z_old = z;
        if (refresh_stiffness && pass < config.picard_max)
            ks = detail::blend_stiffness(
                ks, build_picard_stiffness(traj.space, traj.mass_inv_sqrt, sol),
                config.picard_damping);
    }

    if (refresh_stiffness) {
        SpatialFunction w_end = detail::nodal_from_transformed(traj.space, traj.mass_inv_sqrt,
                                                               sol.right_value());
        traj.k_incoming =
            detail::transformed_cross_stiffness(traj.space, traj.mass_inv_sqrt, w_end, w_end);
    }
    traj.slabs.push_back(std::move(sol));
    traj.stats.push_back(std::move(stats));
    return traj.slabs.back();
}

/// Full march over all slabs. Non-convergent slabs are recorded in the
/// stats, not treated as failures.
inline Trajectory march(const SolverConfig& config, const Problem& problem) {
    Trajectory traj = initialize(config, problem);
    for (std::size_t n = 0; n < config.n_slabs; ++n) march_slab(traj, problem);
    return traj;
}

namespace detail {

inline std::size_t slab_index_for(const Trajectory& traj, double t) {
    const double k = traj.config.slab_length();
    // Left-continuous lookup: slab endpoints belong to the slab on their left.
    double idx = std::ceil(t / k - 1e-9) - 1.0;
    if (idx < 0.0) idx = 0.0;
    const double last = static_cast<double>(traj.slabs.size() - 1);
    if (idx > last) idx = last;
    return static_cast<std::size_t>(idx);
}

} // namespace detail

/// Nodal solution (derivative 0) or velocity (derivative 1) as a spatial
/// function at time t; t is attributed to slabs left-continuously.
inline SpatialFunction solution_at_time(const Trajectory& traj, double t, int derivative = 0) {
    if (derivative < 0 || derivative > 1) throw std::out_of_range("derivative order must be 0 or 1");
    if (traj.slabs.empty()) throw std::invalid_argument("trajectory has no slabs");
    if (t < 0.0 || t > traj.config.final_time + 1e-9)
        throw std::out_of_range("time outside the marched interval");
    const SlabSolution& sol = traj.slabs[detail::slab_index_for(traj, t)];
    return detail::nodal_from_transformed(traj.space, traj.mass_inv_sqrt,
                                          sol.value_at(t, derivative));
}

/// Point value of the discrete solution or velocity at (x, t).
inline double eval_solution(const Trajectory& traj, double x, double t, int derivative = 0) {
    return evaluate(solution_at_time(traj, t, derivative), x);
}

/// L2(0,1) error of displacement plus velocity at the final time, measured
/// against the problem's exact pair using the left trace at t = T.
inline double final_error(const Trajectory& traj, const Problem& problem,
                          std::size_t quad_points = 0) {
    if (!problem.exact_solution || !problem.exact_velocity)
        throw MissingExactSolution("problem carries no exact solution");
    if (traj.slabs.size() != traj.config.n_slabs)
        throw std::invalid_argument("march is incomplete");
    if (quad_points == 0) quad_points = static_cast<std::size_t>(traj.config.space_degree) + 6;
    const double T = traj.config.final_time;

    const SlabSolution& last = traj.slabs.back();
    SpatialFunction u = detail::nodal_from_transformed(traj.space, traj.mass_inv_sqrt,
                                                       last.right_value());
    SpatialFunction v = detail::nodal_from_transformed(traj.space, traj.mass_inv_sqrt,
                                                       last.right_derivative());
    const double eu = l2_norm_of_difference(
        traj.space, u, [&](double x) { return problem.exact_solution(x, T); }, quad_points);
    const double ev = l2_norm_of_difference(
        traj.space, v, [&](double x) { return problem.exact_velocity(x, T); }, quad_points);
    return eu + ev;
}

} // namespace dgwave
