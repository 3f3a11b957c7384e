#pragma once

#include <cmath>
#include <limits>

#include "fdsim/channel.hpp"
#include "fdsim/common.hpp"
#include "fdsim/rx_whitening.hpp"
#include "fdsim/signal_core.hpp"

namespace fdsim {

enum class PrecoderPhase { Forward, Backward };

// Null-space signaling precoder: semi-unitary basis gamma whose column space
// produces zero interference at the protected OFDM decoders, plus the
// transmit-side rotation aligning streams with the whitened channel's right
// singular basis.
struct Precoder {
  Mat gamma;
  Mat rotation;  // identity until rotation_from_svd is applied
  PrecoderPhase phase = PrecoderPhase::Forward;
  int streams = 0;
};

namespace detail {

// Right singular vectors whose singular values fall below
// tau = max_dim * machine_eps * sigma_max * 1e3 span the numerical null
// space. A dimension other than `expected` flags a degenerate draw.
inline Mat nullspace_basis(const Mat& constraint, int expected) {
  Eigen::BDCSVD<Mat> svd(constraint, Eigen::ComputeFullV);
  const RealVec& sv = svd.singularValues();
  const double sigma_max = sv.size() > 0 ? sv(0) : 0.0;
  const double tau = std::max(constraint.rows(), constraint.cols()) *
                     std::numeric_limits<double>::epsilon() * sigma_max * 1e3;
  int null_dim = static_cast<int>(constraint.cols()) -
                 static_cast<int>(sv.size());
  for (Eigen::Index k = sv.size() - 1; k >= 0 && sv(k) <= tau; --k)
    ++null_dim;
  if (null_dim != expected)
    throw NullspaceDimensionMismatch(
        "nullspace_basis: numerical null space has dimension " +
        std::to_string(null_dim) + ", expected " + std::to_string(expected));
  return svd.matrixV().rightCols(expected);
}

}  // namespace detail

// Forward-phase precoder of node i: the stacked zero-interference conditions
// at node i's own attached decoder and at the peer's attached decoder. For
// generic channels the null space has exactly L dimensions.
inline Precoder forward_nullspace(const ConvolutionPair& h_ii,
                                  const ConvolutionPair& h_ij,
                                  const OfdmOps& ops, int i) {
  const int j = (i == 1) ? 2 : 1;
  const Mat fb = ops.F * ops.B;
  Mat constraint(2 * ops.grid.n_subcarriers, ops.grid.block_len());
  constraint.topRows(ops.grid.n_subcarriers) =
      ops.selector(i) * (fb * h_ii.lower);
  constraint.bottomRows(ops.grid.n_subcarriers) =
      ops.selector(j) * (fb * h_ij.lower);
  Precoder p;
  p.phase = PrecoderPhase::Forward;
  p.streams = ops.grid.cp_len;
  p.gamma = detail::nullspace_basis(constraint, p.streams);
  p.rotation = Mat::Identity(p.streams, p.streams);
  return p;
}

// Backward-phase precoder of node i: zero interference at the peer node j's
// uplink OFDM decoder, giving N+L-|set_j| stream dimensions.
inline Precoder backward_nullspace(const ConvolutionPair& h_s,
                                   const OfdmOps& ops, int i) {
  const int j = (i == 1) ? 2 : 1;
  const Mat constraint = ops.selector(j) * (ops.F * (ops.B * h_s.lower));
  Precoder p;
  p.phase = PrecoderPhase::Backward;
  p.streams = ops.grid.block_len() - ops.set_size(j);
  p.gamma = detail::nullspace_basis(constraint, p.streams);
  p.rotation = Mat::Identity(p.streams, p.streams);
  return p;
}

// The transmit rotation is the right singular basis of the whitened
// effective channel; it turns the link into parallel scalar channels.
inline Mat rotation_from_svd(const WhiteningDecomposition& w) {
  return w.right_basis;
}

}  // namespace fdsim
