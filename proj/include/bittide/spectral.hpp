#pragma once

// Closed-loop matrix A = k D B^T, its Metzler eigenstructure, and the
// closed-form steady-state predictions built on it.

#include "bittide/graph.hpp"
#include "bittide/params.hpp"

#include <Eigen/Dense>

#include <optional>

namespace bittide {

struct ClosedLoopMatrix {
    Eigen::MatrixXd A;  ///< k D B^T, an irreducible rate matrix for strong topologies
    Eigen::VectorXd r;  ///< k D (lambda - beta_off)
    double k = 0.0;
};

/// `params` must have beta_off materialized (see materialize()).
ClosedLoopMatrix build_closed_loop(const IncidenceSet& inc, const SystemParams& params);

/// Block-separating similarity A [1 T2] = [1 T2] diag(0, Lambda), with
/// [1 T2]^{-1} = [z^T; V2^T]. Lambda need not be diagonal.
struct StablePart {
    Eigen::MatrixXd Lambda;  ///< (n-1) x (n-1), Hurwitz
    Eigen::MatrixXd T2;      ///< n x (n-1), columns span {x : z^T x = 0}
    Eigen::MatrixXd V2;      ///< n x (n-1)
};

struct SpectralData {
    Eigen::VectorXd z;   ///< Metzler left eigenvector, z > 0, 1^T z = 1
    Eigen::MatrixXd W;   ///< spectral projector 1 z^T
    double metzler_eigenvalue = 0.0;
    StablePart stable;
    /// Group inverse of A (G A = A G = I - W, G W = 0), via the bordered system.
    Eigen::MatrixXd group_inverse;
    /// Spectrum of A: the Metzler eigenvalue followed by eig(Lambda), sorted
    /// by decreasing real part.
    Eigen::VectorXcd eigenvalues;
    /// |Re lambda_2| for the slowest stable mode.
    double slowest_rate = 0.0;
    /// Numerically non-diagonalizable A (ill-conditioned eigenvector basis).
    bool defective = false;

    /// Time for `efolds` e-foldings of the slowest stable mode.
    double convergence_horizon(double efolds = 50.0) const { return efolds / slowest_rate; }
};

/// Throws SpectralError("graph not strongly connected") for reducible A.
SpectralData metzler_eigenvector(const ClosedLoopMatrix& clm);

/// Solves [[A, 1], [z^T, 0]] [G; mu^T] = [I - W; 0].
Eigen::MatrixXd group_inverse_bordered(const Eigen::MatrixXd& A, const Eigen::VectorXd& z);

/// T2 Lambda^{-1} V2^T; the same matrix as the bordered route.
Eigen::MatrixXd group_inverse_from_stable_part(const StablePart& stable);

/// Consensus frequency 1 z^T (q + omega_u), or W (q + r + omega_u) when
/// `r` is supplied (infeasible offsets).
Eigen::VectorXd predict_omega_ss(const SpectralData& sd, const SystemParams& params,
                                 const std::optional<Eigen::VectorXd>& r = std::nullopt);

/// Steady-state correction reached from controller offset q:
/// F(q) = (W - I) omega_u + W (q + r).
Eigen::VectorXd correction_limit(const SpectralData& sd, const ClosedLoopMatrix& clm,
                                 const SystemParams& params, const Eigen::VectorXd& q);

/// Limit of the buffer occupancy under constant offset q:
/// lambda - B^T G (omega_u + q + r).
Eigen::VectorXd predict_beta_ss(const SpectralData& sd, const IncidenceSet& inc,
                                const ClosedLoopMatrix& clm, const SystemParams& params,
                                const Eigen::VectorXd& q);

/// e^{A t} by scaling and squaring; t >= 0.
Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& A, double t);

}  // namespace bittide
