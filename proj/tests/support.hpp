#pragma once

#include "bittide/dynamics.hpp"
#include "bittide/graph.hpp"
#include "bittide/params.hpp"

#include <Eigen/Dense>

#include <initializer_list>

namespace test {

inline Eigen::VectorXd vec(std::initializer_list<double> xs) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

inline double max_abs(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

inline bittide::Topology two_cycle() { return bittide::Topology(2, {{0, 1}, {1, 0}}); }

inline bittide::Topology ring_chord() { return bittide::Topology(3, {{0, 1}, {1, 2}, {2, 0}, {0, 2}}); }

/// Two nodes, k = 0.1, omega_u = (1.00, 1.02), lambda = (10, 10), feasible at theta0 = 0.
inline bittide::SystemParams e1_params() {
    bittide::SystemParams p;
    p.k = 0.1;
    p.omega_u = vec({1.00, 1.02});
    p.lambda = vec({10.0, 10.0});
    return p;
}

inline bittide::Network e1_network() { return bittide::Network(two_cycle(), e1_params(), Eigen::VectorXd::Zero(2)); }

}  // namespace test
