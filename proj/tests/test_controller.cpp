#include "bittide/controller.hpp"
#include "bittide/errors.hpp"
#include "bittide/random.hpp"
#include "support.hpp"

#include <doctest.h>

#include <type_traits>

using namespace bittide;
using test::max_abs;
using test::vec;

// the per-node law can only be fed a NodeView
static_assert(std::is_invocable_r_v<double, decltype(&NodeController::correction), const NodeController&,
                                    const NodeView&>);
static_assert(!std::is_invocable_v<decltype(&NodeController::correction), const NodeController&,
                                   const Eigen::VectorXd&>);

TEST_CASE("proportional correction examples") {
    NodeView v{0, {{0, 10.0, 10.0}, {1, 12.0, 12.0}}};
    CHECK(proportional_correction(v, 0.7) == 0.0);
    NodeView one{1, {{0, 10.1, 10.0}}};
    CHECK(proportional_correction(one, 0.1) == doctest::Approx(0.01).epsilon(1e-12));
    NodeView pm{2, {{0, 12.0, 10.0}, {3, 8.0, 10.0}}};
    for (double k : {0.05, 0.3, 1.0}) CHECK(proportional_correction(pm, k) == 0.0);
    CHECK(proportional_correction(one, 0.1, 0.5) == doctest::Approx(0.51));
}

TEST_CASE("node views hold only incoming edges") {
    const auto topo = generate_topology(TopologyKind::RandomStrong, 6, 4, 0.5);
    Rng rng(1);
    Eigen::VectorXd beta(static_cast<Eigen::Index>(topo.edge_count()));
    for (Eigen::Index e = 0; e < beta.size(); ++e) beta(e) = rng.uniform(0, 20);
    const Eigen::VectorXd off = Eigen::VectorXd::Constant(beta.size(), 10.0);
    for (std::size_t i = 0; i < 6; ++i) {
        const auto view = make_node_view(topo, i, beta, off);
        CHECK(view.node == i);
        CHECK(view.incoming.size() == topo.incoming_edges(i).size());
        for (const auto& m : view.incoming) {
            CHECK(topo.edge(m.edge).dst == i);
            CHECK(m.occupancy == beta(static_cast<Eigen::Index>(m.edge)));
        }
        // perturbing every other buffer leaves the local correction unchanged
        Eigen::VectorXd other = beta;
        for (std::size_t e = 0; e < topo.edge_count(); ++e) {
            if (topo.edge(e).dst != i) other(static_cast<Eigen::Index>(e)) += 100.0;
        }
        CHECK(proportional_correction(make_node_view(topo, i, other, off), 0.3) ==
              proportional_correction(view, 0.3));
    }
}

TEST_CASE("stacked node laws equal the matrix form") {
    Rng rng(9);
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const auto topo = generate_topology(TopologyKind::RandomStrong, 2 + seed % 8, seed, 0.4);
        const auto inc = build_incidence(topo);
        const auto m = static_cast<Eigen::Index>(topo.edge_count());
        const auto n = static_cast<Eigen::Index>(topo.node_count());
        Eigen::VectorXd beta(m), off(m), q(n);
        for (Eigen::Index e = 0; e < m; ++e) {
            beta(e) = rng.uniform(0, 20);
            off(e) = rng.uniform(5, 15);
        }
        for (Eigen::Index i = 0; i < n; ++i) q(i) = rng.uniform(-0.01, 0.01);
        const double k = rng.uniform(0.05, 1);
        const Eigen::VectorXd matrix = k * inc.D * (beta - off) + q;
        // evaluation order must not matter
        Eigen::VectorXd fwd(n), bwd(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            fwd(i) = NodeController(k, q(i)).correction(make_node_view(topo, static_cast<std::size_t>(i), beta, off));
        }
        for (Eigen::Index i = n - 1; i >= 0; --i) {
            bwd(i) = NodeController(k, q(i)).correction(make_node_view(topo, static_cast<std::size_t>(i), beta, off));
        }
        CHECK(max_abs(fwd - matrix) < 1e-12);
        CHECK(fwd == bwd);
    }
}

TEST_CASE("reframe happens exactly once") {
    NodeController c(0.1, 0.0);
    CHECK(c.mode() == Mode::PreReframe);
    c.reframe(0.01);
    CHECK(c.mode() == Mode::PostReframe);
    CHECK(c.offset() == 0.01);
    CHECK_THROWS_AS(c.reframe(0.02), ControllerError);
    CHECK(c.offset() == 0.01);
    NodeView at_offset{0, {{0, 10.0, 10.0}}};
    CHECK(c.correction(at_offset) == 0.01);
}

TEST_CASE("reframe at offset keeps the dynamics") {
    NodeController c(0.1, 0.0);
    NodeView at_offset{0, {{0, 10.0, 10.0}}};
    c.reframe(c.correction(at_offset));
    CHECK(c.offset() == 0.0);
}

TEST_CASE("auto trigger") {
    const Eigen::VectorXd c0 = vec({0.01, -0.01});
    std::vector<CorrectionSample> flat;
    for (int i = 0; i <= 20; ++i) flat.push_back({double(i), c0});
    CHECK(auto_reframe_trigger(flat, 10.0, 1e-15));
    CHECK(auto_reframe_trigger(flat, 20.0, 1e-15));
    // window longer than the history is not an error, just no trigger
    CHECK_FALSE(auto_reframe_trigger(flat, 25.0, 1.0));
    CHECK_FALSE(auto_reframe_trigger({}, 1.0, 1.0));

    std::vector<CorrectionSample> wobble;
    for (int i = 0; i <= 20; ++i) wobble.push_back({double(i), c0 * (1.0 + ((i % 2) ? 1e-3 : -1e-3))});
    CHECK_FALSE(auto_reframe_trigger(wobble, 10.0, 1e-9));
    CHECK(auto_reframe_trigger(wobble, 10.0, 1e-4));

    // only the trailing window counts
    std::vector<CorrectionSample> settling = wobble;
    for (int i = 21; i <= 40; ++i) settling.push_back({double(i), c0});
    CHECK(auto_reframe_trigger(settling, 10.0, 1e-15));
    CHECK_FALSE(auto_reframe_trigger(settling, 30.0, 1e-15));
}

TEST_CASE("default auto schedule") {
    const auto s = default_auto_schedule(0.5, vec({0.97, 1.04, 1.0}), 2);
    CHECK(s.trigger == ReframeSchedule::Trigger::Auto);
    CHECK(s.epsilon == doctest::Approx(1.04e-9));
    CHECK(s.window == doctest::Approx(10.0));
}
