#include "bittide/spectral.hpp"

#include "bittide/errors.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

namespace bittide {

ClosedLoopMatrix build_closed_loop(const IncidenceSet& inc, const SystemParams& params) {
    if (!params.beta_off) throw ValidationError("beta_off must be materialized before building A");
    const auto m = inc.B.cols();
    if (params.lambda.size() != m || params.beta_off->size() != m) {
        throw ValidationError("lambda/beta_off length does not match edge count " + std::to_string(m));
    }
    if (params.k <= 0.0) throw ValidationError("gain k must be positive");
    ClosedLoopMatrix clm;
    clm.k = params.k;
    // D B^T is integer-valued, so the zero row sums survive the scaling exactly.
    clm.A = params.k * (inc.D * inc.B.transpose());
    clm.r = params.k * (inc.D * (params.lambda - *params.beta_off));
    return clm;
}

namespace {

constexpr double kDefectiveCondition = 1e7;

Eigen::VectorXd left_null_vector(const Eigen::MatrixXd& A) {
    const auto n = A.rows();
    // [A^T; 1^T] z = [0; 1] is consistent with a unique solution for an
    // irreducible rate matrix.
    Eigen::MatrixXd system(n + 1, n);
    system.topRows(n) = A.transpose();
    system.row(n).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
    rhs(n) = 1.0;
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(system);
    Eigen::VectorXd z = qr.solve(rhs);
    // one refinement sweep
    z += qr.solve(rhs - system * z);
    return z / z.sum();
}

bool eigenbasis_is_defective(const Eigen::MatrixXd& A) {
    if (A.rows() < 2) return false;
    const Eigen::EigenSolver<Eigen::MatrixXd> es(A, true);
    if (es.info() != Eigen::Success) return true;
    Eigen::MatrixXcd V = es.eigenvectors();
    for (Eigen::Index j = 0; j < V.cols(); ++j) V.col(j).normalize();
    const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(V);
    const auto& sv = svd.singularValues();
    const double smallest = sv(sv.size() - 1);
    return smallest == 0.0 || sv(0) / smallest > kDefectiveCondition;
}

}  // namespace

Eigen::MatrixXd group_inverse_bordered(const Eigen::MatrixXd& A, const Eigen::VectorXd& z) {
    const auto n = A.rows();
    Eigen::MatrixXd bordered = Eigen::MatrixXd::Zero(n + 1, n + 1);
    bordered.topLeftCorner(n, n) = A;
    bordered.topRightCorner(n, 1).setOnes();
    bordered.bottomLeftCorner(1, n) = z.transpose();
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + 1, n);
    rhs.topRows(n) = Eigen::MatrixXd::Identity(n, n) - Eigen::VectorXd::Ones(n) * z.transpose();
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(bordered);
    if (!lu.isInvertible()) throw SpectralError("bordered system is singular; A has a repeated zero eigenvalue");
    return lu.solve(rhs).topRows(n);
}

Eigen::MatrixXd group_inverse_from_stable_part(const StablePart& stable) {
    return stable.T2 * stable.Lambda.fullPivLu().solve(stable.V2.transpose());
}

SpectralData metzler_eigenvector(const ClosedLoopMatrix& clm) {
    const auto& A = clm.A;
    const auto n = A.rows();
    if (n == 0 || A.cols() != n) throw ValidationError("closed-loop matrix must be square and non-empty");
    if (!is_irreducible(A)) throw SpectralError("graph not strongly connected");

    SpectralData sd;
    sd.z = left_null_vector(A);
    if ((sd.z.array() <= 0.0).any()) throw SpectralError("graph not strongly connected (null vector not positive)");
    sd.W = Eigen::VectorXd::Ones(n) * sd.z.transpose();
    sd.metzler_eigenvalue = 0.0;

    if (n == 1) {
        sd.stable = {Eigen::MatrixXd(0, 0), Eigen::MatrixXd(1, 0), Eigen::MatrixXd(1, 0)};
        sd.group_inverse = Eigen::MatrixXd::Zero(1, 1);
        sd.eigenvalues = Eigen::VectorXcd::Zero(1);
        sd.slowest_rate = std::numeric_limits<double>::infinity();
        return sd;
    }

    // Orthonormal basis of z-perp: the trailing columns of the Householder
    // reflector that maps z onto e1.
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(sd.z);
    const Eigen::MatrixXd Q = qr.householderQ();
    Eigen::MatrixXd T(n, n);
    T.col(0).setOnes();
    T.rightCols(n - 1) = Q.rightCols(n - 1);
    const Eigen::MatrixXd Tinv = T.partialPivLu().inverse();
    sd.stable.T2 = T.rightCols(n - 1);
    sd.stable.V2 = Tinv.bottomRows(n - 1).transpose();
    sd.stable.Lambda = sd.stable.V2.transpose() * A * sd.stable.T2;

    const Eigen::EigenSolver<Eigen::MatrixXd> es(sd.stable.Lambda, false);
    if (es.info() != Eigen::Success) throw SpectralError("eigenvalue iteration failed on the stable block");
    std::vector<std::complex<double>> stable_eigs(es.eigenvalues().data(),
                                                  es.eigenvalues().data() + es.eigenvalues().size());
    std::sort(stable_eigs.begin(), stable_eigs.end(), [](auto a, auto b) {
        return a.real() != b.real() ? a.real() > b.real() : a.imag() > b.imag();
    });
    if (stable_eigs.front().real() >= 0.0) {
        throw SpectralError("stable block has an eigenvalue with non-negative real part");
    }
    sd.slowest_rate = -stable_eigs.front().real();
    sd.eigenvalues.resize(n);
    sd.eigenvalues(0) = sd.metzler_eigenvalue;
    for (Eigen::Index i = 0; i < n - 1; ++i) sd.eigenvalues(i + 1) = stable_eigs[static_cast<std::size_t>(i)];

    sd.group_inverse = group_inverse_bordered(A, sd.z);
    sd.defective = eigenbasis_is_defective(A);
    return sd;
}

Eigen::VectorXd predict_omega_ss(const SpectralData& sd, const SystemParams& params,
                                 const std::optional<Eigen::VectorXd>& r) {
    Eigen::VectorXd drive = params.omega_u;
    if (params.q.size() != 0) drive += params.q;
    if (r) drive += *r;
    return Eigen::VectorXd::Constant(drive.size(), sd.z.dot(drive));
}

Eigen::VectorXd correction_limit(const SpectralData& sd, const ClosedLoopMatrix& clm,
                                 const SystemParams& params, const Eigen::VectorXd& q) {
    return sd.W * params.omega_u - params.omega_u + sd.W * (q + clm.r);
}

Eigen::VectorXd predict_beta_ss(const SpectralData& sd, const IncidenceSet& inc,
                                const ClosedLoopMatrix& clm, const SystemParams& params,
                                const Eigen::VectorXd& q) {
    const Eigen::VectorXd drive = params.omega_u + q + clm.r;
    return params.lambda - inc.B.transpose() * (sd.group_inverse * drive);
}

Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& A, double t) {
    if (!(t >= 0.0)) throw ValidationError("matrix exponential needs t >= 0");
    if (t == 0.0) return Eigen::MatrixXd::Identity(A.rows(), A.cols());
    const Eigen::MatrixXd scaled = A * t;
    return scaled.exp();
}

}  // namespace bittide
