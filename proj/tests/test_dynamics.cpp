#include <doctest.h>

#include <cmath>
#include <random>

#include "jjp/dynamics.hpp"
#include "jjp/steady.hpp"

using namespace jjp;

namespace {

NetworkModel single_mode(double gamma_up, double gamma = 1.0) {
    NetworkModel m;
    m.n_modes = 1;
    m.epsilon = RealVector::Zero(1);
    m.tunneling = Matrix::Zero(1, 1);
    m.capacitance = RealMatrix::Zero(1, 1);
    m.gamma_up = RealVector::Constant(1, gamma_up);
    m.gamma = gamma;
    return m;
}

NetworkModel two_mode(double K, double Ec, double g1, double g2) {
    NetworkModel m;
    m.n_modes = 2;
    m.epsilon = RealVector::Zero(2);
    m.tunneling = Matrix::Zero(2, 2);
    m.tunneling(0, 1) = m.tunneling(1, 0) = K;
    m.capacitance = RealMatrix::Zero(2, 2);
    m.capacitance(0, 1) = m.capacitance(1, 0) = Ec;
    m.gamma_up = RealVector(2);
    m.gamma_up << g1, g2;
    m.gamma = 1.0;
    return m;
}

NetworkModel random_network(std::mt19937_64& rng, int J, double Ec_scale) {
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    NetworkModel m;
    m.n_modes = J;
    m.epsilon = RealVector::Zero(J);
    m.tunneling = Matrix::Zero(J, J);
    m.capacitance = RealMatrix::Zero(J, J);
    m.gamma_up = RealVector::Zero(J);
    m.gamma = 1.0;
    for (int j = 0; j < J; ++j) {
        m.epsilon(j) = uni(rng);
        m.gamma_up(j) = 1.0 + std::abs(uni(rng));
        for (int k = j + 1; k < J; ++k) {
            m.tunneling(j, k) = Complex(uni(rng), uni(rng));
            m.tunneling(k, j) = std::conj(m.tunneling(j, k));
            m.capacitance(j, k) = m.capacitance(k, j) = Ec_scale * std::abs(uni(rng));
        }
    }
    return m;
}

Matrix random_hermitian(std::mt19937_64& rng, int J, double scale) {
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Matrix s = Matrix::Zero(J, J);
    for (int j = 0; j < J; ++j) {
        s(j, j) = Complex(scale * std::abs(uni(rng)), 0.0);
        for (int k = j + 1; k < J; ++k) {
            s(j, k) = scale * Complex(uni(rng), uni(rng));
            s(k, j) = std::conj(s(j, k));
        }
    }
    return s;
}

}  // namespace

TEST_CASE("single-mode population equation") {
    const auto m = single_mode(5.0);
    Matrix sigma = Matrix::Zero(1, 1);
    CHECK(mdm_derivative(m, sigma)(0, 0).real() == doctest::Approx(5.0));
    sigma(0, 0) = 5.0;  // n = gamma_up / gamma
    CHECK(std::abs(mdm_derivative(m, sigma)(0, 0)) < 1e-14);
}

TEST_CASE("two-mode derivative, hand-evaluated") {
    const double K = 0.7, g1 = 3.0;
    const auto m = two_mode(K, 0.0, g1, 1.0);
    Matrix sigma = Matrix::Zero(2, 2);
    sigma(0, 0) = 2.0;
    sigma(1, 1) = 1.0;
    const Matrix d = mdm_derivative(m, sigma);
    // dz_12/dt = -i K (n_1 - n_2), dn_1/dt = -gamma n_1 + gamma_up_1
    CHECK(std::abs(d(0, 1) - Complex(0.0, -K)) < 1e-15);
    CHECK(d(0, 0).real() == doctest::Approx(-2.0 + g1));
    CHECK(mdm::hermiticity_defect(d) < 1e-15);
}

TEST_CASE("derivative rejects non-hermitian input") {
    const auto m = two_mode(0.5, 0.0, 1.0, 1.0);
    Matrix bad = Matrix::Zero(2, 2);
    bad(0, 1) = Complex(1.0, 0.0);
    bad(1, 0) = Complex(0.5, 0.0);
    CHECK_THROWS_AS(mdm_derivative(m, bad), std::invalid_argument);
}

TEST_CASE("hermiticity preservation on random inputs") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const auto m = random_network(rng, 4, 0.3);
        const Matrix sigma = random_hermitian(rng, 4, 2.0);
        const Matrix d = mdm_derivative(m, sigma);
        CHECK(mdm::hermiticity_defect(d) <= 1e-14 * std::max(1.0, d.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("tunneling conserves total population") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        const auto m = random_network(rng, 4, 0.5);
        const Matrix sigma = random_hermitian(rng, 4, 3.0);
        const Matrix d = mdm_derivative(m, sigma);
        double sum_dn = 0.0, expected = 0.0;
        for (int j = 0; j < 4; ++j) {
            sum_dn += d(j, j).real();
            expected += -m.gamma * sigma(j, j).real() + m.gamma_up(j);
        }
        CHECK(std::abs(sum_dn - expected) < 1e-12 * std::max(1.0, std::abs(expected)));
    }
}

TEST_CASE("Ec = 0 dynamics is linear in sigma") {
    std::mt19937_64 rng(13);
    const auto m = random_network(rng, 4, 0.0);
    const Matrix zero = Matrix::Zero(4, 4);
    const Matrix d0 = mdm_derivative(m, zero);
    auto G = [&](const Matrix& s) { return (mdm_derivative(m, s) - d0).eval(); };
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix s1 = random_hermitian(rng, 4, 2.0);
        const Matrix s2 = random_hermitian(rng, 4, 2.0);
        const double a = 0.7, b = -1.3;
        const Matrix lhs = G((a * s1 + b * s2).eval());
        const Matrix rhs = a * G(s1) + b * G(s2);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("single-mode relaxation matches the closed form") {
    const auto m = single_mode(5.0);
    const auto traj = evolve(m, Matrix::Zero(1, 1), 1.0, 1e-10);
    REQUIRE(!traj.empty());
    CHECK(traj.back().time == doctest::Approx(1.0).epsilon(1e-12));
    // n(t) = 5 (1 - e^{-t})
    CHECK(traj.back().state(0, 0).real() ==
          doctest::Approx(5.0 * (1.0 - std::exp(-1.0))).epsilon(1e-8));
}

TEST_CASE("K = 0 modes decouple and coherences stay zero") {
    auto m = two_mode(0.0, 0.4, 3.0, 1.0);
    Matrix init = Matrix::Zero(2, 2);
    const auto traj = evolve(m, init, 2.5, 1e-10);
    for (const auto& s : traj) {
        CHECK(std::abs(s.state(0, 1)) < 1e-14);
        CHECK(s.state(0, 0).real() ==
              doctest::Approx(3.0 * (1.0 - std::exp(-s.time))).epsilon(1e-7));
    }
}

TEST_CASE("trajectories keep the state positive semidefinite") {
    const auto m = two_mode(0.5, 0.1, 1.0, 0.25);
    const auto traj = evolve(m, Matrix::Zero(2, 2), 10.0, 1e-9);
    for (const auto& s : traj) CHECK(mdm::min_eigenvalue(s.state) >= -1e-8);

    // four-terminal pump from the vacuum, checked at every accepted step
    PumpParams p;
    p.K = 0.1;
    p.Ec = 0.1;
    p.gamma_up_base = 100.0;
    p.bias = 1.0;
    p.flux_ratio = 0.25;
    const auto pump = build_symmetric_pump(p);
    const auto pt = evolve(pump, Matrix::Zero(4, 4), 5.0, 1e-9);
    REQUIRE(pt.size() > 10);
    for (const auto& s : pt) CHECK(mdm::min_eigenvalue(s.state) >= -1e-8);
}

TEST_CASE("evolve contract checks") {
    const auto m = single_mode(1.0);
    CHECK_THROWS_AS(evolve(m, Matrix::Zero(1, 1), 1.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(evolve(m, Matrix::Zero(1, 1), 1.0, 0.0), std::invalid_argument);
    const auto traj = evolve(m, Matrix::Zero(1, 1), 0.0, 1e-9);
    CHECK(traj.size() == 1);  // t_end = 0 emits the initial sample only
    CHECK(traj[0].time == 0.0);
}

TEST_CASE("sample grid is honored exactly") {
    const auto m = single_mode(2.0);
    EvolveOptions opts;
    opts.rel_tol = 1e-10;
    opts.sample_times = {0.0, 0.25, 0.5, 1.0};
    const auto traj = evolve(m, Matrix::Zero(1, 1), 1.0, opts);
    REQUIRE(traj.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(traj[i].time == opts.sample_times[i]);
    CHECK(traj[1].state(0, 0).real() ==
          doctest::Approx(2.0 * (1.0 - std::exp(-0.25))).epsilon(1e-8));
}

TEST_CASE("relax_to_steady reaches the fixed point of the dynamics") {
    const auto m = two_mode(0.5, 0.0, 2.0, 1.0);
    const auto res = relax_to_steady(m, equilibrium_state(m), 1e-10, 200.0);
    CHECK(res.converged);
    CHECK(res.residual < 1e-10);
    CHECK(res.method == SteadyMethod::ode_relax);
    // closed form: dn = (dgamma_up/gamma) / (1 + 4K^2/gamma^2) = 0.5
    CHECK(res.state(0, 0).real() == doctest::Approx(1.75).epsilon(1e-8));
    CHECK(res.state(1, 1).real() == doctest::Approx(1.25).epsilon(1e-8));
}

TEST_CASE("relax_to_steady reports non-convergence instead of throwing") {
    const auto m = two_mode(0.5, 0.0, 2.0, 1.0);
    const auto res = relax_to_steady(m, equilibrium_state(m), 1e-12, 0.05);
    CHECK_FALSE(res.converged);
    CHECK(res.elapsed_time <= 0.05 + 1e-12);
}
