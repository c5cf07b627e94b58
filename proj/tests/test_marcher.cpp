#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>

#include "dgwave/marcher.hpp"
#include "dgwave/quadrature.hpp"
#include "dgwave/study.hpp"

using namespace dgwave;

namespace {

const double pi = 3.14159265358979323846;

Problem zero_problem()
{
    Problem prob;
    prob.forcing = [](double, double) { return 0.0; };
    prob.initial_displacement = [](double) { return 0.0; };
    prob.initial_velocity = [](double) { return 0.0; };
    prob.exact_solution = [](double, double) { return 0.0; };
    prob.exact_velocity = [](double, double) { return 0.0; };
    return prob;
}

// Element-wise Gauss integral of g(w(x), w'(x)) over (0,1).
double integrate(const SpatialFunction& w, const std::function<double(double, double)>& g)
{
    const FemSpace1D& space = *w.space;
    const int p = space.degree();
    const double h = 1.0 / static_cast<double>(space.n_elements());
    const QuadratureRule rule = gauss_legendre(static_cast<std::size_t>(2 * p + 4));
    double sum = 0.0;
    for (std::size_t e = 0; e < space.n_elements(); ++e) {
        for (std::size_t qp = 0; qp < rule.size(); ++qp) {
            const double xi = 0.5 * (rule.nodes[qp] + 1.0);
            const Vector vals = space.shape_values(xi);
            const Vector ders = space.shape_derivatives(xi);
            double v = 0.0, d = 0.0;
            for (int a = 0; a <= p; ++a) {
                if (const auto ia = space.dof_index(e, a)) {
                    v += w.coefficients[*ia] * vals[a];
                    d += w.coefficients[*ia] * ders[a] / h;
                }
            }
            sum += rule.weights[qp] * 0.5 * h * g(v, d);
        }
    }
    return sum;
}

// Physical energy 1/2 |u_t|^2 + gamma^2/2 |u|^2 + 1/12 |u_x|^4_{L4}.
double energy_at(const Trajectory& traj, double gamma, double t)
{
    const SpatialFunction u = solution_at_time(traj, t, 0);
    const SpatialFunction v = solution_at_time(traj, t, 1);
    const double kinetic = integrate(v, [](double val, double) { return val * val; });
    const double reactive = integrate(u, [](double val, double) { return val * val; });
    const double quartic =
        integrate(u, [](double, double der) { return der * der * der * der; });
    return 0.5 * kinetic + 0.5 * gamma * gamma * reactive + quartic / 12.0;
}

// Error of the frozen-stiffness march against the linear standing wave.
double linear_wave_error(double h)
{
    SolverConfig config;
    config.gamma = 0.0;
    config.final_time = 0.5;
    config.space_degree = 2;
    config.time_degree = 3;
    config.n_elements = static_cast<std::size_t>(std::llround(1.0 / h));
    config.n_slabs = static_cast<std::size_t>(std::llround(0.5 / (h * h)));

    Problem prob;
    prob.forcing = [](double, double) { return 0.0; };
    prob.initial_displacement = [](double x) { return std::sin(pi * x); };
    prob.initial_velocity = [](double) { return 0.0; };
    const double c = pi / std::sqrt(3.0);
    prob.exact_solution = [c](double x, double t) {
        return std::cos(c * t) * std::sin(pi * x);
    };
    prob.exact_velocity = [c](double x, double t) {
        return -c * std::sin(c * t) * std::sin(pi * x);
    };

    Trajectory traj = initialize(config, prob);
    // The tent function has squared slope one everywhere, so freezing the
    // stiffness at it turns the cubic flux into the unit-coefficient linear
    // one: the march then solves u_tt = (1/3) u_xx exactly.
    const SpatialFunction tent =
        interpolate(traj.space, [](double x) { return std::min(x, 1.0 - x); });
    DenseMatrix k_frozen = assemble_cross_stiffness(traj.space, tent, tent);
    k_frozen = traj.mass_inv_sqrt * k_frozen * traj.mass_inv_sqrt;
    k_frozen *= 1.0 / 3.0;
    traj.k_incoming = k_frozen;
    for (std::size_t s = 0; s < config.n_slabs; ++s) march_slab(traj, prob, false);
    REQUIRE(traj.all_converged());
    return final_error(traj, prob);
}

} // namespace

TEST_CASE("Picard stiffness expansion has the triangular layout", "[marcher]")
{
    const FemSpace1D space(4, 2);
    const DenseMatrix mass = assemble_mass(space);
    const DenseMatrix mass_inv_sqrt = spd_inv_sqrt(mass);
    const TimeSlabBasis basis(TimeSlab{1, 0.0, 0.25}, 2);

    DenseMatrix coef(space.dof_count(), basis.size());
    for (std::size_t m = 0; m < coef.rows(); ++m)
        for (std::size_t j = 0; j < coef.cols(); ++j)
            coef(m, j) = std::sin(1.0 + static_cast<double>(m + 3 * j));
    const SlabSolution sol{basis, coef};

    const PicardStiffness ks = build_picard_stiffness(space, mass_inv_sqrt, sol);
    REQUIRE(ks.dof_count == space.dof_count());
    REQUIRE(ks.terms.size() == 6);
    const int expect_a[6] = {1, 1, 1, 2, 2, 3};
    const int expect_b[6] = {1, 2, 3, 2, 3, 3};
    for (std::size_t i = 0; i < 6; ++i) {
        REQUIRE(ks.terms[i].a == expect_a[i]);
        REQUIRE(ks.terms[i].b == expect_b[i]);
        REQUIRE(ks.terms[i].coefficient == (expect_a[i] == expect_b[i] ? 1.0 : 2.0));
        REQUIRE(ks.terms[i].spatial.rows() == space.dof_count());
    }
}

TEST_CASE("Picard stiffness of special iterates", "[marcher]")
{
    const FemSpace1D space(4, 2);
    const DenseMatrix mass_inv_sqrt = spd_inv_sqrt(assemble_mass(space));
    const TimeSlabBasis basis(TimeSlab{1, 0.0, 0.25}, 2);

    const SlabSolution zero{basis, DenseMatrix(space.dof_count(), basis.size())};
    const PicardStiffness ks0 = build_picard_stiffness(space, mass_inv_sqrt, zero);
    for (const auto& term : ks0.terms) REQUIRE(term.spatial.max_abs() == 0.0);

    // Constant in time: only the phi_1 phi_1 term survives, and it equals
    // the transformed cubic-flux linearization at that profile.
    const SpatialFunction w = interpolate(space, [](double x) { return x * (1.0 - x); });
    DenseMatrix coef(space.dof_count(), basis.size());
    const Vector z = spd_sqrt(assemble_mass(space)) * w.coefficients;
    for (std::size_t m = 0; m < coef.rows(); ++m) coef(m, 0) = z[m];
    const PicardStiffness ks = build_picard_stiffness(space, mass_inv_sqrt, {basis, coef});

    DenseMatrix expected = assemble_cross_stiffness(space, w, w);
    expected = mass_inv_sqrt * expected * mass_inv_sqrt;
    expected *= 1.0 / 3.0;
    DenseMatrix dev = ks.at_right();
    dev *= -1.0;
    dev += expected;
    REQUIRE(dev.max_abs() <= 1e-12 * (1.0 + expected.max_abs()));
    for (const auto& term : ks.terms)
        if (term.a != 1 || term.b != 1) REQUIRE(term.spatial.max_abs() <= 1e-13);
}

TEST_CASE("Initialization builds the transformed state", "[marcher]")
{
    SolverConfig config;
    config.space_degree = 2;
    config.n_elements = 4;
    const Problem prob = benchmark_problem(1.0);
    const Trajectory traj = initialize(config, prob);

    REQUIRE(traj.space.dof_count() == 7);
    REQUIRE(traj.slabs.empty());
    REQUIRE(max_abs(traj.z0) == 0.0); // zero initial displacement
    REQUIRE(traj.k_incoming.max_abs() <= 1e-14);

    // zdot0 maps back to the interpolated initial velocity.
    const Vector u1 = traj.mass_inv_sqrt * traj.zdot0;
    const SpatialFunction want = interpolate(traj.space, prob.initial_velocity);
    for (std::size_t i = 0; i < u1.size(); ++i)
        REQUIRE(u1[i] == Catch::Approx(want.coefficients[i]).margin(1e-10));

    // M^{1/2} and M^{-1/2} invert each other.
    DenseMatrix prod = traj.mass_sqrt * traj.mass_inv_sqrt;
    prod *= -1.0;
    prod += DenseMatrix::identity(7);
    REQUIRE(prod.max_abs() <= 1e-11);
}

TEST_CASE("Initialization validates the configuration", "[marcher]")
{
    const Problem prob = benchmark_problem(1.0);
    SolverConfig config;

    SolverConfig bad = config;
    bad.final_time = 0.0;
    REQUIRE_THROWS_AS(initialize(bad, prob), std::invalid_argument);
    bad = config;
    bad.n_slabs = 0;
    REQUIRE_THROWS_AS(initialize(bad, prob), std::invalid_argument);
    bad = config;
    bad.picard_tol = 0.0;
    REQUIRE_THROWS_AS(initialize(bad, prob), std::invalid_argument);
    bad = config;
    bad.picard_max = 0;
    REQUIRE_THROWS_AS(initialize(bad, prob), std::invalid_argument);
    bad = config;
    bad.picard_damping = 0.0;
    REQUIRE_THROWS_AS(initialize(bad, prob), std::invalid_argument);
    bad.picard_damping = 1.5;
    REQUIRE_THROWS_AS(initialize(bad, prob), std::invalid_argument);

    Problem torn = prob;
    torn.forcing = nullptr;
    REQUIRE_THROWS_AS(initialize(config, torn), std::invalid_argument);

    Problem lifted = prob;
    lifted.initial_displacement = [](double x) { return std::cos(pi * x); };
    REQUIRE_THROWS_AS(initialize(config, lifted), std::invalid_argument);
}

TEST_CASE("Zero problem stays identically zero", "[marcher]")
{
    SolverConfig config;
    config.n_slabs = 8;
    const Problem prob = zero_problem();
    const Trajectory traj = march(config, prob);

    REQUIRE(traj.all_converged());
    for (const SlabStats& s : traj.stats) REQUIRE(s.iterations == 1);
    for (const SlabSolution& sol : traj.slabs) REQUIRE(sol.coefficients.max_abs() == 0.0);
    REQUIRE(final_error(traj, prob) == 0.0);
    REQUIRE(eval_solution(traj, 0.375, 0.7) == 0.0);
    REQUIRE(eval_solution(traj, 0.375, 0.7, 1) == 0.0);
}

TEST_CASE("Frozen stiffness makes every slab a two-pass solve", "[marcher]")
{
    SolverConfig config;
    config.n_slabs = 4;
    const Problem prob = benchmark_problem(1.0);
    Trajectory traj = initialize(config, prob);
    for (std::size_t s = 0; s < config.n_slabs; ++s) march_slab(traj, prob, false);
    REQUIRE(traj.all_converged());
    for (const SlabStats& s : traj.stats) {
        REQUIRE(s.iterations == 2);
        REQUIRE(s.residual <= config.picard_tol);
    }
}

TEST_CASE("Benchmark march at the coarsest table configuration", "[marcher]")
{
    const SolverConfig config = study_config(2, 0.25);
    const Problem prob = benchmark_problem(1.0);
    const Trajectory traj = march(config, prob);

    REQUIRE(traj.all_converged());
    for (const SlabStats& s : traj.stats) {
        const std::size_t n = s.iterations_to(1e-10);
        REQUIRE(n >= 1);
        REQUIRE(n <= 30);
    }
    // Reported value for this configuration: 1.2123e-2, matched within 25%.
    const double err = final_error(traj, prob);
    REQUIRE(err > 1.2123e-2 * 0.75);
    REQUIRE(err < 1.2123e-2 * 1.25);
}

TEST_CASE("Point evaluation is left-continuous and nodal-exact", "[marcher]")
{
    const SolverConfig config = study_config(2, 0.25);
    const Problem prob = benchmark_problem(1.0);
    const Trajectory traj = march(config, prob);

    const double k = config.slab_length();
    const double t_edge = 4.0 * k;
    const SpatialFunction at_edge = solution_at_time(traj, t_edge);
    const Vector from_left = traj.mass_inv_sqrt * traj.slabs[3].right_value();
    for (std::size_t i = 0; i < from_left.size(); ++i)
        REQUIRE(at_edge.coefficients[i] == Catch::Approx(from_left[i]).margin(1e-14));

    // At an interior time the nodal coefficients are point values.
    const SpatialFunction u = solution_at_time(traj, 0.3);
    const Vector xs = traj.space.interior_node_coordinates();
    for (std::size_t i = 0; i < xs.size(); ++i)
        REQUIRE(eval_solution(traj, xs[i], 0.3) ==
                Catch::Approx(u.coefficients[i]).margin(1e-12));

    REQUIRE_THROWS_AS(solution_at_time(traj, 1.5), std::out_of_range);
    REQUIRE_THROWS_AS(solution_at_time(traj, -0.1), std::out_of_range);
    REQUIRE_THROWS_AS(solution_at_time(traj, 0.5, 2), std::out_of_range);
}

TEST_CASE("Final error demands an exact solution and a finished march", "[marcher]")
{
    SolverConfig config;
    config.n_slabs = 4;
    Problem prob = benchmark_problem(1.0);
    Trajectory traj = initialize(config, prob);
    march_slab(traj, prob);
    REQUIRE_THROWS_AS(final_error(traj, prob), std::invalid_argument);
    for (std::size_t s = 1; s < config.n_slabs; ++s) march_slab(traj, prob);
    REQUIRE_THROWS_AS(march_slab(traj, prob), std::out_of_range);

    Problem blind = prob;
    blind.exact_solution = nullptr;
    REQUIRE_THROWS_AS(final_error(traj, blind), MissingExactSolution);
    REQUIRE(final_error(traj, prob) > 0.0);
}

TEST_CASE("Unforced march dissipates the physical energy", "[marcher]")
{
    SolverConfig config;
    config.gamma = 1.0;
    config.space_degree = 2;
    config.time_degree = 3;
    config.n_elements = 8;
    config.n_slabs = 32;
    Problem prob;
    prob.forcing = [](double, double) { return 0.0; };
    prob.initial_displacement = [](double x) { return 0.5 * std::sin(pi * x); };
    prob.initial_velocity = [](double x) { return 0.2 * std::sin(2.0 * pi * x); };

    const Trajectory traj = march(config, prob);
    REQUIRE(traj.all_converged());

    const double e0 = energy_at(traj, config.gamma, 0.0);
    double prev = e0;
    for (std::size_t s = 1; s <= config.n_slabs; ++s) {
        const double e = energy_at(traj, config.gamma, static_cast<double>(s) * config.slab_length());
        REQUIRE(e <= prev + 1e-9 * e0);
        prev = e;
    }
    REQUIRE(prev < 0.5 * e0);
}

TEST_CASE("Frozen unit-slope stiffness marches the linear wave", "[marcher]")
{
    const double coarse = linear_wave_error(0.25);
    const double fine = linear_wave_error(0.125);
    REQUIRE(fine < 1e-3);
    // k drops by 4 between the runs; demand at least order 1.5 in k.
    REQUIRE(coarse / fine >= 8.0);
}

TEST_CASE("Displacement is continuous at the fixed point", "[marcher]")
{
    SolverConfig config = study_config(3, 0.2);
    config.picard_tol = 1e-12;
    config.picard_max = 60;
    const Problem prob = benchmark_problem(1.0);
    const Trajectory traj = march(config, prob);
    REQUIRE(traj.all_converged());

    double max_disp_jump = 0.0, max_vel_jump = 0.0, scale = 0.0;
    for (std::size_t s = 1; s < traj.slabs.size(); ++s) {
        const Vector in = traj.slabs[s - 1].right_value();
        const Vector out = traj.slabs[s].left_value();
        Vector jump = out;
        for (std::size_t i = 0; i < jump.size(); ++i) jump[i] -= in[i];
        max_disp_jump = std::max(max_disp_jump, max_abs(jump));
        scale = std::max(scale, max_abs(in));

        const Vector din = traj.slabs[s - 1].right_derivative();
        Vector dout = traj.slabs[s].left_derivative();
        for (std::size_t i = 0; i < dout.size(); ++i) dout[i] -= din[i];
        max_vel_jump = std::max(max_vel_jump, max_abs(dout));
    }
    // The first test row pins the displacement trace exactly at convergence;
    // the dissipation lives entirely in the velocity jumps.
    REQUIRE(max_disp_jump <= 1e-8 * scale);
    REQUIRE(max_vel_jump > 1e3 * max_disp_jump);
}

TEST_CASE("Iteration cap is recorded rather than fatal", "[marcher]")
{
    SolverConfig config = study_config(3, 0.25);
    config.picard_max = 2;
    const Trajectory traj = run_single(config);
    REQUIRE(!traj.all_converged());
    REQUIRE(traj.slabs.size() == config.n_slabs);
    bool capped = false;
    for (const SlabStats& s : traj.stats) {
        REQUIRE(s.iterations <= 2);
        if (!s.converged) {
            capped = true;
            REQUIRE(s.residual_history.size() == s.iterations);
        }
    }
    REQUIRE(capped);
}

TEST_CASE("Transformed and nodal marches agree", "[marcher]")
{
    // One frozen-stiffness slab solved twice: in z = M^{1/2} u coordinates
    // with identity mass, and in nodal coordinates with the assembled mass.
    const FemSpace1D space(4, 2);
    const DenseMatrix mass = assemble_mass(space);
    const DenseMatrix mass_sqrt = spd_sqrt(mass);
    const DenseMatrix mass_inv_sqrt = spd_inv_sqrt(mass);
    const TimeSlabBasis basis(TimeSlab{1, 0.0, 0.125}, 3);
    const double gamma = 1.0;
    const Problem prob = benchmark_problem(gamma);

    const SpatialFunction w = interpolate(space, [](double x) { return std::sin(pi * x); });
    DenseMatrix k_nodal = assemble_cross_stiffness(space, w, w);
    k_nodal *= 1.0 / 3.0;
    const DenseMatrix k_z = mass_inv_sqrt * k_nodal * mass_inv_sqrt;

    const SpatialFunction u0 = interpolate(space, [](double x) { return 0.2 * std::sin(pi * x); });
    const SpatialFunction u1 = interpolate(space, prob.initial_velocity);

    PicardStiffness ks_z = PicardStiffness::constant(k_z);
    const DenseMatrix a_z = assemble_block_A(basis, gamma, ks_z);
    SlabTraces tr_z{mass_sqrt * u0.coefficients, mass_sqrt * u1.coefficients, k_z};
    const auto g_z = [&](double t) {
        return mass_inv_sqrt *
               assemble_load(space, [&](double x) { return prob.forcing(x, t); }, 7);
    };
    const Vector z = lu_solve(a_z, assemble_rhs(basis, gamma, tr_z, g_z, 7));

    // Nodal coordinates: A_u = M (x) S + K-blocks. The trace terms need
    // z_in = M u_in with the flux matrix K M^{-1} so that both the reaction
    // and the flux see the right vectors.
    PicardStiffness ks_u = PicardStiffness::constant(k_nodal);
    const DenseMatrix a_u = assemble_block_A(basis, gamma, ks_u, mass);
    const DenseMatrix mass_inv = mass_inv_sqrt * mass_inv_sqrt;
    SlabTraces tr_u{mass * u0.coefficients, mass * u1.coefficients, k_nodal * mass_inv};
    const auto g_u = [&](double t) {
        return assemble_load(space, [&](double x) { return prob.forcing(x, t); }, 7);
    };
    const Vector u = lu_solve(a_u, assemble_rhs(basis, gamma, tr_u, g_u, 7));

    const DenseMatrix zc = unpack_coefficients(basis, z);
    const DenseMatrix uc = unpack_coefficients(basis, u);
    for (std::size_t j = 0; j < basis.size(); ++j) {
        Vector uj(space.dof_count());
        for (std::size_t m = 0; m < uj.size(); ++m) uj[m] = uc(m, j);
        const Vector mapped = mass_sqrt * uj;
        for (std::size_t m = 0; m < mapped.size(); ++m)
            REQUIRE(mapped[m] == Catch::Approx(zc(m, j)).margin(1e-8));
    }
}
