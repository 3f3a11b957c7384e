#pragma once

#include <cmath>
#include <limits>

#include "fdsim/channel.hpp"
#include "fdsim/common.hpp"
#include "fdsim/signal_core.hpp"

namespace fdsim {

enum class SiRegime { NoResidualSI, ResidualSI, Saturated };

inline const char* to_string(SiRegime r) {
  switch (r) {
    case SiRegime::NoResidualSI: return "no_residual_si";
    case SiRegime::ResidualSI: return "residual_si";
    default: return "saturated";
  }
}

// Residual self-interference after cancellation, as a function of the split
// ratio rho and the node transmit power P. Below rho = P_th/P cancellation is
// perfect; up to min{1, P_sat/P} a noise-level residual N_0/P_th remains;
// beyond P_sat the receive chain saturates and no decoding is possible.
struct ResidualSiModel {
  double rho = 0.0;
  double p_th = 0.0;
  double p_sat = 0.0;
  double alpha_eq = 0.0;
  SiRegime regime = SiRegime::NoResidualSI;
};

inline ResidualSiModel residual_si(double rho, double p, double p_th,
                                   double p_sat, double n0) {
  if (!(rho >= 0.0) || !(rho <= 1.0))
    throw ConfigError("residual_si: rho must lie in [0, 1]");
  if (!(p > 0.0) || !(p_th > 0.0) || !(p_sat > 0.0) || !(n0 > 0.0))
    throw ConfigError("residual_si: powers must be positive");
  ResidualSiModel m;
  m.rho = rho;
  m.p_th = p_th;
  m.p_sat = p_sat;
  if (rho <= p_th / p) {
    m.alpha_eq = 0.0;
    m.regime = SiRegime::NoResidualSI;
  } else if (rho <= std::min(1.0, p_sat / p)) {
    m.alpha_eq = n0 / p_th;
    m.regime = SiRegime::ResidualSI;
  } else {
    m.alpha_eq = std::numeric_limits<double>::quiet_NaN();
    m.regime = SiRegime::Saturated;
  }
  return m;
}

// Equivalent-noise covariance of one decoding problem together with its
// whitening and the decomposition of the whitened effective channel.
struct WhiteningDecomposition {
  Mat cov;            // Hermitian positive definite, M x M
  Mat inv_sqrt;       // cov^{-1/2}, Hermitian
  Mat left_basis;     // U of the whitened effective channel's SVD
  RealVec diag_gains; // singular values, nonincreasing
  Mat right_basis;    // Q; transmit-side rotation
};

// Hermitian inverse square root via eigendecomposition. Eigenvalues at or
// below 1e-14 of the largest indicate an assembly bug, not physics.
inline Mat inv_sqrt(const Mat& cov) {
  if (cov.rows() != cov.cols())
    throw DimensionMismatch("inv_sqrt: matrix must be square");
  Eigen::SelfAdjointEigenSolver<Mat> es(
      Complex(0.5, 0.0) * (cov + cov.adjoint()));
  if (es.info() != Eigen::Success)
    throw NumericalError("inv_sqrt: eigendecomposition failed");
  const RealVec& lam = es.eigenvalues();
  const double lam_max = lam(lam.size() - 1);
  if (!(lam_max > 0.0))
    throw NotPositiveDefinite("inv_sqrt: matrix is not positive definite");
  const double floor = 1e-14 * lam_max;
  RealVec inv_root(lam.size());
  for (Eigen::Index k = 0; k < lam.size(); ++k) {
    if (lam(k) <= floor)
      throw NotPositiveDefinite("inv_sqrt: eigenvalue at or below floor");
    inv_root(k) = 1.0 / std::sqrt(lam(k));
  }
  return es.eigenvectors() * inv_root.asDiagonal() *
         es.eigenvectors().adjoint();
}

// Time-domain covariance of one OFDM block with subcarrier covariance P:
// A F^{-1} P F A^H.
inline Mat ofdm_tx_block_cov(const OfdmOps& ops, const Mat& p_subcarrier) {
  if (p_subcarrier.rows() != ops.grid.n_subcarriers ||
      p_subcarrier.cols() != ops.grid.n_subcarriers)
    throw DimensionMismatch("ofdm_tx_block_cov: P must be N x N");
  return ops.A * (ops.Finv * p_subcarrier * ops.F) * ops.A.adjoint();
}

namespace detail {

inline WhiteningDecomposition decompose(Mat cov, const Mat& effective) {
  WhiteningDecomposition w;
  w.cov = std::move(cov);
  w.inv_sqrt = inv_sqrt(w.cov);
  Eigen::BDCSVD<Mat> svd(w.inv_sqrt * effective,
                         Eigen::ComputeThinU | Eigen::ComputeThinV);
  w.left_basis = svd.matrixU();
  w.diag_gains = svd.singularValues();
  w.right_basis = svd.matrixV();
  return w;
}

}  // namespace detail

// Noise seen by node j when decoding the peer's signaling streams, no
// residual SI: thermal noise plus the peer's own OFDM block arriving through
// the node-to-node channel (current block through the causal part, previous
// block through the wrap-around part). The decomposition is of
// cov^{-1/2} H_s_lower Gamma_i.
inline WhiteningDecomposition forward_signaling_cov_no_si(
    const ConvolutionPair& h_s, const Mat& p_i_ofdm, const Mat& gamma_i,
    double rho, double alpha_b, double n0, const OfdmOps& ops) {
  const int nl = ops.grid.block_len();
  const Mat s_i = ofdm_tx_block_cov(ops, p_i_ofdm);
  Mat cov = n0 * Mat::Identity(nl, nl);
  cov += rho * alpha_b *
         (h_s.lower * s_i * h_s.lower.adjoint() +
          h_s.upper * s_i * h_s.upper.adjoint());
  return detail::decompose(std::move(cov), h_s.lower * gamma_i);
}

// Same decoding problem when a residual of the node's own transmission
// remains: adds the residual-scaled copies of its OFDM block and of its
// signaling precoder Gramian (uniform per-stream power (N+L) P_b / L).
inline WhiteningDecomposition forward_signaling_cov_with_si(
    const ConvolutionPair& h_s, const Mat& p_i_ofdm, const Mat& p_j_ofdm,
    const Mat& gamma_i, const Mat& gamma_j, double rho, double alpha_b,
    double n0, double p_th, double p_b, const OfdmOps& ops) {
  const int nl = ops.grid.block_len();
  const double streams = static_cast<double>(gamma_j.cols());
  const Mat s_i = ofdm_tx_block_cov(ops, p_i_ofdm);
  Mat cov = n0 * Mat::Identity(nl, nl);
  cov += rho * alpha_b *
         (h_s.lower * s_i * h_s.lower.adjoint() +
          h_s.upper * s_i * h_s.upper.adjoint());
  cov += (rho * n0 / p_th) * ofdm_tx_block_cov(ops, p_j_ofdm);
  cov += Complex(rho * n0 * static_cast<double>(nl) * p_b / (streams * p_th),
                 0.0) *
         (gamma_j * gamma_j.adjoint());
  return detail::decompose(std::move(cov), h_s.lower * gamma_i);
}

// Noise seen by node i when decoding its own uplink OFDM under residual SI:
// the node's backward signaling leaks through the residual path into the
// reduced subcarrier space. Decomposes cov^{-1/2} Dt_i diag(h_tilde) Dt_i^H.
inline WhiteningDecomposition backward_ofdm_cov_with_si(
    const Mat& gamma_i_b, const Vec& h_tilde_ii, double rho, double n0,
    double p_th, double p, const OfdmOps& ops, int i) {
  const int nl = ops.grid.block_len();
  const double streams = static_cast<double>(gamma_i_b.cols());
  const Mat& dt = ops.reduced(i);
  const Mat t = dt * (ops.F * (ops.B * gamma_i_b));
  Mat cov = n0 * Mat::Identity(dt.rows(), dt.rows());
  cov += Complex(rho * n0 * static_cast<double>(nl) * p / (streams * p_th),
                 0.0) *
         (t * t.adjoint());
  const Mat effective =
      dt * h_tilde_ii.asDiagonal().toDenseMatrix() * dt.adjoint();
  return detail::decompose(std::move(cov), effective);
}

// Noise seen by node j when decoding the peer's backward signaling: thermal
// noise, the uplink OFDM block of the attached node paired with the peer
// (through the cross link), and under residual SI the node's own backward
// precoder Gramian (uniform per-stream power). Decomposes
// cov^{-1/2} H_s_lower Gamma_i_b.
inline WhiteningDecomposition backward_signaling_cov(
    const ConvolutionPair& h_ji, const ConvolutionPair& h_s,
    const Mat& p_i_ofdm_b, const Mat& gamma_i_b, const Mat& gamma_j_b,
    double rho, double alpha_ji, double n0, SiRegime regime, double p_th,
    double p, const OfdmOps& ops) {
  if (regime == SiRegime::Saturated)
    throw SaturatedRegime("backward_signaling_cov: receive chain saturated");
  const int nl = ops.grid.block_len();
  const Mat s_i = ofdm_tx_block_cov(ops, p_i_ofdm_b);
  Mat cov = n0 * Mat::Identity(nl, nl);
  cov += rho * alpha_ji *
         (h_ji.lower * s_i * h_ji.lower.adjoint() +
          h_ji.upper * s_i * h_ji.upper.adjoint());
  if (regime == SiRegime::ResidualSI) {
    const double streams = static_cast<double>(gamma_j_b.cols());
    cov += Complex(n0 * rho * static_cast<double>(nl) * p / (p_th * streams),
                   0.0) *
           (gamma_j_b * gamma_j_b.adjoint());
  }
  return detail::decompose(std::move(cov), h_s.lower * gamma_i_b);
}

}  // namespace fdsim
