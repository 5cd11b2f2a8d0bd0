#include "bittide/errors.hpp"
#include "bittide/random.hpp"
#include "bittide/spectral.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace bittide;
using test::max_abs;
using test::vec;

namespace {

ClosedLoopMatrix closed_loop_for(const Topology& topo, double k, const Eigen::VectorXd& theta0) {
    SystemParams p;
    p.k = k;
    p.omega_u = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(topo.node_count()));
    p.lambda = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(topo.edge_count()), 10.0);
    const auto inc = build_incidence(topo);
    return build_closed_loop(inc, materialize(p, inc, theta0));
}

SystemParams random_params(Rng& rng, const Topology& topo) {
    SystemParams p;
    p.k = rng.uniform(0.05, 1.0);
    p.omega_u = Eigen::VectorXd(static_cast<Eigen::Index>(topo.node_count()));
    for (Eigen::Index i = 0; i < p.omega_u.size(); ++i) p.omega_u(i) = rng.uniform(0.95, 1.05);
    p.lambda = Eigen::VectorXd(static_cast<Eigen::Index>(topo.edge_count()));
    for (Eigen::Index e = 0; e < p.lambda.size(); ++e) p.lambda(e) = rng.uniform(5, 15);
    return p;
}

Eigen::VectorXd random_vector(Rng& rng, Eigen::Index n, double lo, double hi) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.uniform(lo, hi);
    return v;
}

}  // namespace

TEST_CASE("closed loop of the 2-cycle") {
    const auto clm = closed_loop_for(test::two_cycle(), 0.1, Eigen::VectorXd::Zero(2));
    Eigen::MatrixXd A(2, 2);
    A << -0.1, 0.1, 0.1, -0.1;
    CHECK(max_abs(clm.A - A) < 1e-15);
    CHECK(max_abs(clm.r) == 0.0);
}

TEST_CASE("closed loop of the ring with chord (hand-expanded)") {
    const auto clm = closed_loop_for(test::ring_chord(), 1.0, Eigen::VectorXd::Zero(3));
    Eigen::MatrixXd A(3, 3);
    A << -1, 0, 1, 1, -1, 0, 1, 1, -2;
    CHECK(clm.A == A);
}

TEST_CASE("feasible offsets give r = -A theta0") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto topo = generate_topology(TopologyKind::RandomStrong, 6, static_cast<std::uint64_t>(trial), 0.4);
        const Eigen::VectorXd theta0 = random_vector(rng, 6, -2, 2);
        const auto clm = closed_loop_for(topo, 0.3, theta0);
        CHECK(max_abs(clm.r + clm.A * theta0) < 1e-12);
    }
}

TEST_CASE("dimension mismatch is rejected") {
    auto p = test::e1_params();
    p.lambda = vec({10.0});
    const auto inc = build_incidence(test::two_cycle());
    CHECK_THROWS_AS(build_closed_loop(inc, materialize(p, inc, Eigen::VectorXd::Zero(2))), ValidationError);
}

TEST_CASE("Metzler eigenvector examples") {
    CHECK(max_abs(metzler_eigenvector(closed_loop_for(test::two_cycle(), 0.1, Eigen::VectorXd::Zero(2))).z -
                  vec({0.5, 0.5})) < 1e-14);
    const auto ring = generate_topology(TopologyKind::Ring, 3, 0);
    CHECK(max_abs(metzler_eigenvector(closed_loop_for(ring, 1.0, Eigen::VectorXd::Zero(3))).z -
                  Eigen::VectorXd::Constant(3, 1.0 / 3.0)) < 1e-14);
    const auto sd = metzler_eigenvector(closed_loop_for(test::ring_chord(), 1.0, Eigen::VectorXd::Zero(3)));
    CHECK(max_abs(sd.z - vec({0.5, 0.25, 0.25})) < 1e-14);
}

TEST_CASE("ring spectrum matches the circulant eigenvalues") {
    const auto sd =
        metzler_eigenvector(closed_loop_for(generate_topology(TopologyKind::Ring, 3, 0), 1.0, Eigen::VectorXd::Zero(3)));
    REQUIRE(sd.eigenvalues.size() == 3);
    CHECK(std::abs(sd.eigenvalues(0)) < 1e-12);
    CHECK(std::abs(sd.eigenvalues(1).real() + 1.5) < 1e-12);
    CHECK(std::abs(sd.eigenvalues(2).real() + 1.5) < 1e-12);
    CHECK(std::abs(std::abs(sd.eigenvalues(1).imag()) - std::sqrt(3.0) / 2.0) < 1e-12);
    CHECK(sd.eigenvalues(1).imag() == doctest::Approx(-sd.eigenvalues(2).imag()));
    CHECK(sd.slowest_rate == doctest::Approx(1.5));
    CHECK(sd.convergence_horizon() == doctest::Approx(50.0 / 1.5));
}

TEST_CASE("reducible matrix is rejected") {
    ClosedLoopMatrix clm;
    clm.k = 1;
    clm.A = Eigen::MatrixXd(2, 2);
    clm.A << -1, 1, 0, 0;
    clm.r = Eigen::VectorXd::Zero(2);
    CHECK_THROWS_WITH_AS(metzler_eigenvector(clm), "graph not strongly connected", SpectralError);
}

TEST_CASE("defective A: both group inverse routes agree") {
    // ring plus chord has the double eigenvalue -2 with a single eigenvector
    const auto sd = metzler_eigenvector(closed_loop_for(test::ring_chord(), 1.0, Eigen::VectorXd::Zero(3)));
    CHECK(sd.defective);
    CHECK(std::abs(sd.eigenvalues(1) - std::complex<double>(-2, 0)) < 1e-6);
    const auto G2 = group_inverse_from_stable_part(sd.stable);
    CHECK(max_abs(sd.group_inverse - G2) < 1e-10);
}

TEST_CASE("spectral invariants on random strong graphs") {
    Rng rng(11);
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        const std::size_t n = 2 + seed % 7;
        const auto topo = generate_topology(TopologyKind::RandomStrong, n, seed, rng.uniform(0, 0.6));
        auto p = random_params(rng, topo);
        const auto inc = build_incidence(topo);
        const Eigen::VectorXd theta0 = random_vector(rng, static_cast<Eigen::Index>(n), -2, 2);
        p = materialize(p, inc, theta0);
        const auto clm = build_closed_loop(inc, p);
        const auto N = static_cast<Eigen::Index>(n);
        const Eigen::VectorXd one = Eigen::VectorXd::Ones(N);
        const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(N, N);

        // rate matrix
        CHECK(max_abs(clm.A * one) <= 1e-14 * clm.k * static_cast<double>(topo.max_in_degree()));
        for (Eigen::Index i = 0; i < N; ++i)
            for (Eigen::Index j = 0; j < N; ++j)
                if (i != j) CHECK(clm.A(i, j) >= 0.0);
        CHECK(is_irreducible(clm.A));

        const auto sd = metzler_eigenvector(clm);
        const double scale = max_abs(clm.A);
        CHECK((sd.z.array() > 0).all());
        CHECK(std::abs(sd.z.sum() - 1.0) < 1e-12);
        CHECK(max_abs(sd.z.transpose() * clm.A) <= 1e-12 * scale);
        CHECK(max_abs(sd.W - one * sd.z.transpose()) == 0.0);
        CHECK(max_abs(sd.W * sd.W - sd.W) < 1e-10);
        CHECK(max_abs(sd.W * clm.A) < 1e-10 * scale);
        CHECK(max_abs(clm.A * sd.W) < 1e-10 * scale);
        CHECK(sd.metzler_eigenvalue == 0.0);
        for (Eigen::Index i = 1; i < sd.eigenvalues.size(); ++i) CHECK(sd.eigenvalues(i).real() < 0.0);

        // block separation: A T2 = T2 Lambda, V2^T T2 = I, z^T T2 = 0
        CHECK(max_abs(clm.A * sd.stable.T2 - sd.stable.T2 * sd.stable.Lambda) < 1e-10 * scale);
        CHECK(max_abs(sd.stable.V2.transpose() * sd.stable.T2 - Eigen::MatrixXd::Identity(N - 1, N - 1)) < 1e-10);
        CHECK(max_abs(sd.z.transpose() * sd.stable.T2) < 1e-12);

        // group inverse
        const auto& G = sd.group_inverse;
        CHECK(max_abs(G * clm.A - (I - sd.W)) < 1e-10);
        CHECK(max_abs(clm.A * G - (I - sd.W)) < 1e-10);
        CHECK(max_abs(G * sd.W) < 1e-10);
        CHECK(max_abs(G - group_inverse_from_stable_part(sd.stable)) < 1e-9 * max_abs(G));

        // feasibility => W r = 0
        CHECK(max_abs(sd.W * clm.r) < 1e-12);

        // F is affine with linear part W
        const Eigen::VectorXd q1 = random_vector(rng, N, -0.01, 0.01);
        const Eigen::VectorXd q2 = random_vector(rng, N, -0.01, 0.01);
        CHECK(max_abs(correction_limit(sd, clm, p, q1) - correction_limit(sd, clm, p, q2) - sd.W * (q1 - q2)) <
              1e-14);

        // fixed point of the reframe map
        const Eigen::VectorXd F0 = correction_limit(sd, clm, p, Eigen::VectorXd::Zero(N));
        CHECK(max_abs(correction_limit(sd, clm, p, F0) - (sd.W - I) * p.omega_u) < 1e-10);

        // consensus prediction
        const Eigen::VectorXd w = predict_omega_ss(sd, p);
        CHECK(max_abs(w - Eigen::VectorXd::Constant(N, sd.z.dot(p.omega_u + p.q))) == 0.0);
        CHECK(max_abs(predict_omega_ss(sd, p, clm.r) - w) < 1e-14);

        // predicted occupancy: beta_ss - lambda in range(B^T), so every cycle sum vanishes
        const Eigen::VectorXd beta = predict_beta_ss(sd, inc, clm, p, p.q);
        const Eigen::VectorXd x = inc.B.transpose().completeOrthogonalDecomposition().solve(beta - p.lambda);
        CHECK(max_abs(inc.B.transpose() * x - (beta - p.lambda)) < 1e-10);
        const double ring_sum = [&] {
            double s = 0;
            for (std::size_t e = 0; e < n; ++e) s += beta(static_cast<Eigen::Index>(e)) - p.lambda(static_cast<Eigen::Index>(e));
            return s;
        }();
        CHECK(std::abs(ring_sum) < 1e-10);  // generated graphs start with the directed ring

        // steady state consistency: k D (beta_ss - beta_off) + q = F(q)
        CHECK(max_abs(p.k * inc.D * (beta - *p.beta_off) + p.q - correction_limit(sd, clm, p, p.q)) < 1e-10);
    }
}

TEST_CASE("predicted consensus frequency") {
    SpectralData sd;
    SystemParams p;
    sd.z = vec({0.5, 0.5});
    p.omega_u = vec({1.00, 1.02});
    p.q = Eigen::VectorXd::Zero(2);
    CHECK(max_abs(predict_omega_ss(sd, p) - vec({1.01, 1.01})) < 1e-15);

    sd.z = vec({0.5, 0.25, 0.25});
    p.omega_u = vec({1, 1, 1});
    p.q = Eigen::VectorXd::Zero(3);
    CHECK(max_abs(predict_omega_ss(sd, p) - vec({1, 1, 1})) < 1e-15);
    // weighted average 0.48 + 0.25 + 0.27
    p.omega_u = vec({0.96, 1.00, 1.08});
    CHECK(max_abs(predict_omega_ss(sd, p) - vec({1.00, 1.00, 1.00})) < 1e-15);
}

TEST_CASE("E1 closed-form values") {
    const auto net = test::e1_network();
    const auto& sd = net.spectral();
    const auto& p = net.params();
    CHECK(max_abs(correction_limit(sd, net.closed_loop(), p, Eigen::VectorXd::Zero(2)) - vec({0.01, -0.01})) < 1e-15);
    CHECK(max_abs(predict_beta_ss(sd, net.incidence(), net.closed_loop(), p, p.q) - vec({9.9, 10.1})) < 1e-12);
    CHECK(max_abs(predict_omega_ss(sd, p) - vec({1.01, 1.01})) < 1e-15);

    // uniform clocks: prediction is the offsets themselves; F(0) = 0
    auto u = test::e1_params();
    u.omega_u = vec({1.0, 1.0});
    const Network uni(test::two_cycle(), u, Eigen::VectorXd::Zero(2));
    CHECK(max_abs(predict_beta_ss(uni.spectral(), uni.incidence(), uni.closed_loop(), uni.params(), uni.params().q) -
                  uni.beta_off()) < 1e-14);
    CHECK(max_abs(correction_limit(uni.spectral(), uni.closed_loop(), uni.params(), Eigen::VectorXd::Zero(2))) < 1e-15);
}

TEST_CASE("matrix exponential") {
    const auto clm = closed_loop_for(test::two_cycle(), 0.1, Eigen::VectorXd::Zero(2));
    CHECK(matrix_exponential(clm.A, 0.0) == Eigen::MatrixXd::Identity(2, 2));
    const auto E = matrix_exponential(clm.A, 5.0);
    CHECK(std::abs(E(0, 0) - 0.6839397205857212) < 1e-14);
    CHECK(std::abs(E(0, 1) - 0.31606027941427883) < 1e-14);
    CHECK(std::abs(E(1, 0) - 0.31606027941427883) < 1e-14);
    CHECK(std::abs(E(1, 1) - 0.6839397205857212) < 1e-14);
    CHECK_THROWS_AS(matrix_exponential(clm.A, -1.0), ValidationError);

    Rng rng(3);
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto topo = generate_topology(TopologyKind::RandomStrong, 2 + seed % 7, seed, 0.3);
        const auto c = closed_loop_for(topo, rng.uniform(0.05, 1.0), Eigen::VectorXd::Zero(
                                                                     static_cast<Eigen::Index>(topo.node_count())));
        const auto sd = metzler_eigenvector(c);
        for (double f : {0.1, 1.0, 10.0}) {
            const auto Et = matrix_exponential(c.A, f / sd.slowest_rate);
            CHECK(max_abs(Et.rowwise().sum().array() - 1.0) < 1e-10);
            CHECK(Et.minCoeff() >= -1e-12);
        }
        const auto Einf = matrix_exponential(c.A, sd.convergence_horizon());
        CHECK(max_abs(Einf - sd.W) < 1e-8);
    }
}
