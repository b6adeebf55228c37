#include <doctest.h>

#include <cmath>
#include <random>

#include "jjp/observables.hpp"
#include "jjp/steady.hpp"

using namespace jjp;

namespace {

NetworkModel two_mode(double K, double Ec, double g1, double g2, double gamma = 1.0) {
    NetworkModel m;
    m.n_modes = 2;
    m.epsilon = RealVector::Zero(2);
    m.tunneling = Matrix::Zero(2, 2);
    m.tunneling(0, 1) = m.tunneling(1, 0) = K;
    m.capacitance = RealMatrix::Zero(2, 2);
    m.capacitance(0, 1) = m.capacitance(1, 0) = Ec;
    m.gamma_up = RealVector(2);
    m.gamma_up << g1, g2;
    m.gamma = gamma;
    return m;
}

PumpParams fig2d_params(double bias = 1.0, double flux = 0.25) {
    PumpParams p;
    p.K = 0.1;
    p.Ec = 0.1;
    p.gamma_up_base = 100.0;
    p.bias = bias;
    p.flux_ratio = flux;
    return p;
}

}  // namespace

TEST_CASE("K = 0 converges in one iteration to the bath equilibrium") {
    auto m = two_mode(0.0, 0.0, 4.0, 2.5);
    const auto res = fixed_point_iterate(m);
    CHECK(res.converged);
    CHECK(res.iterations == 1);
    CHECK(res.state(0, 0).real() == 4.0);
    CHECK(res.state(1, 1).real() == 2.5);
    CHECK(std::abs(res.state(0, 1)) == 0.0);
    CHECK(res.residual <= 1e-15);
}

TEST_CASE("two-mode closed form: all three solvers agree") {
    // dn = (dgamma_up/gamma) / (1 + 4 K^2/gamma^2); gamma=1, K=0.5, gup=(2,1)
    const auto m = two_mode(0.5, 0.0, 2.0, 1.0);

    FixedPointConfig cfg;
    cfg.tol = 1e-12;
    const auto fp = fixed_point_iterate(m, cfg);
    REQUIRE(fp.converged);
    CHECK(fp.state(0, 0).real() == doctest::Approx(1.75).epsilon(1e-10));
    CHECK(fp.state(1, 1).real() == doctest::Approx(1.25).epsilon(1e-10));
    // z_12 = -i K dn / gamma = -0.25 i
    CHECK(std::abs(fp.state(0, 1) - Complex(0.0, -0.25)) < 1e-10);

    const auto lin = solve_linear_ec0(m);
    CHECK(lin.converged);
    CHECK(lin.method == SteadyMethod::linear_ec0);
    CHECK(std::abs(lin.state(0, 0).real() - 1.75) < 1e-12);
    CHECK(std::abs(lin.state(1, 1).real() - 1.25) < 1e-12);
    CHECK(lin.residual < 1e-12);

    const auto ode = relax_to_steady(m, equilibrium_state(m), 1e-10, 500.0);
    REQUIRE(ode.converged);
    CHECK((fp.state - lin.state).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((fp.state - ode.state).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("detuned modes: the three solvers still agree") {
    auto m = two_mode(0.3, 0.0, 2.0, 1.0);
    m.epsilon << 0.5, -0.4;
    m.tunneling(0, 1) = Complex(0.3, 0.2);
    m.tunneling(1, 0) = std::conj(m.tunneling(0, 1));

    FixedPointConfig cfg;
    cfg.tol = 1e-12;
    const auto fp = fixed_point_iterate(m, cfg);
    const auto lin = solve_linear_ec0(m);
    const auto ode = relax_to_steady(m, equilibrium_state(m), 1e-10, 500.0);
    REQUIRE(fp.converged);
    REQUIRE(ode.converged);
    CHECK((fp.state - lin.state).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((fp.state - ode.state).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(lin.residual < 1e-12);
    // detuning shifts the coherence off the pure -i K dn / gamma value
    CHECK(std::abs(fp.state(0, 1).real()) > 1e-4);
}

TEST_CASE("solve_linear_ec0 contract") {
    const auto m0 = two_mode(0.0, 0.0, 3.0, 1.0);
    const auto r = solve_linear_ec0(m0);
    CHECK(r.state(0, 0).real() == doctest::Approx(3.0).epsilon(1e-14));

    const auto mc = two_mode(0.5, 0.1, 3.0, 1.0);
    CHECK_THROWS_AS(solve_linear_ec0(mc), std::invalid_argument);
}

TEST_CASE("residual measures the steady-state defect") {
    auto m = two_mode(0.0, 0.0, 2.0, 1.0);
    Matrix sigma = equilibrium_state(m);
    CHECK(residual(m, sigma) <= 1e-15);
    sigma(0, 0) += 1e-3;  // linear response of the -gamma n term
    CHECK(residual(m, sigma) == doctest::Approx(1e-3).epsilon(1e-10));
}

TEST_CASE("pump steady state: residual below tolerance, PSD, Kirchhoff") {
    const auto m = build_symmetric_pump(fig2d_params());
    FixedPointConfig cfg;
    cfg.tol = 1e-10;
    const auto res = fixed_point_iterate(m, cfg);
    REQUIRE(res.converged);
    CHECK(res.residual < 1e-10);
    CHECK(mdm::hermiticity_defect(res.state) < 1e-12);
    CHECK(mdm::min_eigenvalue(res.state) >= -1e-8);
    const auto cur = current_report(m, res.state);
    CHECK(std::abs(cur.conservation_defect) < 1e-8);
}

TEST_CASE("fixed point and ODE relaxation agree at pump parameters") {
    const auto m = build_symmetric_pump(fig2d_params());
    FixedPointConfig cfg;
    cfg.tol = 1e-11;
    const auto fp = fixed_point_iterate(m, cfg);
    const auto ode = relax_to_steady(m, equilibrium_state(m), 1e-10, 2000.0);
    REQUIRE(fp.converged);
    REQUIRE(ode.converged);
    CHECK((fp.state - ode.state).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("singular coherence denominator is reported with the pair") {
    // gamma = 0 with equal onsite energies and no charging leaves the
    // denominator exactly zero; the solver must name the offending pair.
    auto m = two_mode(0.5, 0.0, 2.0, 1.0);
    m.gamma = 0.0;
    Matrix init = Matrix::Zero(2, 2);
    init(0, 0) = 2.0;
    init(1, 1) = 1.0;
    CHECK_THROWS_WITH_AS(fixed_point_iterate(m, {}, init), doctest::Contains("(0,1)"),
                         std::runtime_error);
}

TEST_CASE("random initialization is reproducible and seed-dependent") {
    const auto m = build_symmetric_pump(fig2d_params());
    const Matrix a = random_state(m, 42), b = random_state(m, 42), c = random_state(m, 43);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
    CHECK(mdm::hermiticity_defect(a) == 0.0);

    FixedPointConfig cfg;
    cfg.tol = 1e-10;
    cfg.random_init = true;
    cfg.seed = 7;
    const auto r1 = fixed_point_iterate(m, cfg);
    const auto r2 = fixed_point_iterate(m, cfg);
    CHECK((r1.state - r2.state).cwiseAbs().maxCoeff() == 0.0);
    CHECK(r1.seed == 7);
}

TEST_CASE("multi_start: identical states at K = 0 and at pump parameters") {
    const auto m0 = two_mode(0.0, 0.0, 2.0, 1.0);
    FixedPointConfig tight;
    tight.tol = 1e-12;
    const auto rep0 = multi_start(m0, 4, 100, tight);
    CHECK(rep0.n_converged == 4);
    CHECK(rep0.max_pairwise_distance < 1e-10);

    const auto m = build_symmetric_pump(fig2d_params());
    FixedPointConfig cfg;
    cfg.tol = 1e-10;
    const auto rep = multi_start(m, 6, 1234, cfg);
    CHECK(rep.n_converged == 6);
    CHECK(rep.max_pairwise_distance < 1e-8);
    CHECK(rep.max_population_distance <= rep.max_pairwise_distance);
}

TEST_CASE("multi_start counts non-convergence instead of throwing") {
    auto p = fig2d_params();
    p.Ec = 50.0;
    p.K = 1.0;
    p.bias = 5.0;
    const auto m = build_symmetric_pump(p);
    FixedPointConfig cfg;
    cfg.alpha = 1.0;
    cfg.max_iter = 200;
    const auto rep = multi_start(m, 3, 9, cfg);
    CHECK(rep.n_starts == 3);
    CHECK(rep.runs.size() == 3);
    CHECK(rep.n_converged <= 3);  // contract: failures are counted, not thrown
}

TEST_CASE("random networks: solver agreement, Kirchhoff, PSD") {
    std::mt19937_64 rng(2026);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int trial = 0; trial < 6; ++trial) {
        const int J = 3 + trial % 2;
        NetworkModel m;
        m.n_modes = J;
        m.epsilon = RealVector::Zero(J);
        m.tunneling = Matrix::Zero(J, J);
        m.capacitance = RealMatrix::Zero(J, J);
        m.gamma_up = RealVector::Zero(J);
        m.gamma = 1.0;
        const bool with_charging = trial % 3 == 0;
        for (int j = 0; j < J; ++j) {
            m.epsilon(j) = 0.3 * uni(rng);
            m.gamma_up(j) = 2.0 + uni(rng);
            for (int k = j + 1; k < J; ++k) {
                m.tunneling(j, k) = 0.3 * Complex(uni(rng), uni(rng));
                m.tunneling(k, j) = std::conj(m.tunneling(j, k));
                if (with_charging)
                    m.capacitance(j, k) = m.capacitance(k, j) = 0.05 * std::abs(uni(rng));
            }
        }
        REQUIRE(validate(m).ok());

        FixedPointConfig cfg;
        cfg.tol = 1e-11;
        const auto fp = fixed_point_iterate(m, cfg);
        REQUIRE(fp.converged);
        const auto ode = relax_to_steady(m, equilibrium_state(m), 1e-10, 2000.0);
        REQUIRE(ode.converged);
        CHECK((fp.state - ode.state).cwiseAbs().maxCoeff() < 1e-8);
        if (!with_charging) {
            const auto lin = solve_linear_ec0(m);
            CHECK((fp.state - lin.state).cwiseAbs().maxCoeff() < 1e-8);
        }
        const auto cur = current_report(m, fp.state);
        CHECK(std::abs(cur.conservation_defect) < 1e-8);
        CHECK(mdm::min_eigenvalue(fp.state) >= -1e-8);
    }
}

TEST_CASE("fixed_point contract checks") {
    const auto m = two_mode(0.5, 0.0, 2.0, 1.0);
    FixedPointConfig cfg;
    cfg.tol = 0.0;
    CHECK_THROWS_AS(fixed_point_iterate(m, cfg), std::invalid_argument);
    cfg.tol = 1e-8;
    cfg.alpha = 1.5;
    CHECK_THROWS_AS(fixed_point_iterate(m, cfg), std::invalid_argument);
    cfg.alpha = 0.5;
    cfg.max_iter = 2;
    const auto res = fixed_point_iterate(m, cfg);
    CHECK_FALSE(res.converged);  // max_iter exhausted reports, not throws
    CHECK(res.iterations == 2);
}
