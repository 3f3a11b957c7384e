#pragma once

#include <cmath>

#include "fdsim/channel.hpp"
#include "fdsim/common.hpp"

namespace fdsim {

struct EnergyReport {
  double exact = 0.0;   // joules per symbol recycled
  double approx = 0.0;  // beta * alpha_c * (1 - rho) * P
  double eta_e = 0.0;   // exact / e_tx
  double e_tx = 0.0;    // per-symbol transmit budget P
  double beta = 0.0;
};

namespace detail {

// H_lower^H H_lower + H_upper^H H_upper: per-symbol received-energy operator
// of one convolution channel (current block plus spill-over of the previous
// one).
inline Mat gram_sum(const ConvolutionPair& h) {
  return h.lower.adjoint() * h.lower + h.upper.adjoint() * h.upper;
}

inline double real_trace(const Mat& m) { return m.trace().real(); }

}  // namespace detail

// Recycled energy at one node in the forward phase. x_own / x_peer are the
// (N+L) x (N+L) transmit covariances of this node and of the peer node
// (OFDM block plus rotated signaling streams). The harvester sees the peer's
// signal through the node-to-node channel, the node's own circulator leakage,
// and its own multipath echo, with the leakage/echo cross term kept.
inline EnergyReport energy_forward(const ConvolutionPair& h_s,
                                   const ConvolutionPair& h_m,
                                   const Mat& x_own, const Mat& x_peer,
                                   double rho, double beta, double alpha_b,
                                   double alpha_c, double alpha_m, double p) {
  const Eigen::Index nl = x_own.rows();
  if (x_own.cols() != nl || x_peer.rows() != nl || x_peer.cols() != nl ||
      h_s.lower.rows() != nl || h_m.lower.rows() != nl)
    throw DimensionMismatch("energy_forward: inconsistent block sizes");
  const Mat lead = std::sqrt(alpha_c) * Mat::Identity(nl, nl) +
                   std::sqrt(alpha_m) * h_m.lower;
  const Mat m_si =
      alpha_m * (h_m.upper.adjoint() * h_m.upper) + lead.adjoint() * lead;
  const double tr = alpha_b * detail::real_trace(detail::gram_sum(h_s) * x_peer) +
                    detail::real_trace(m_si * x_own);
  EnergyReport r;
  r.beta = beta;
  r.e_tx = p;
  r.exact = beta * (1.0 - rho) / static_cast<double>(nl) * tr;
  r.approx = beta * alpha_c * (1.0 - rho) * p;
  r.eta_e = r.exact / p;
  return r;
}

// Recycled energy at one node in the backward phase: adds the uplink OFDM
// blocks of both attached nodes (own via alpha_ii, peer's via the cross
// link) to the signaling, leakage, and echo terms.
inline EnergyReport energy_backward(
    const ConvolutionPair& h_own_an, const ConvolutionPair& h_peer_an,
    const ConvolutionPair& h_s, const ConvolutionPair& h_m,
    const Mat& s_own_an, const Mat& s_peer_an, const Mat& x_own,
    const Mat& x_peer, double rho, double beta, double alpha_ii,
    double alpha_ij, double alpha_b, double alpha_c, double alpha_m,
    double p) {
  const Eigen::Index nl = x_own.rows();
  if (s_own_an.rows() != nl || s_peer_an.rows() != nl || x_peer.rows() != nl ||
      h_own_an.lower.rows() != nl || h_peer_an.lower.rows() != nl ||
      h_s.lower.rows() != nl || h_m.lower.rows() != nl)
    throw DimensionMismatch("energy_backward: inconsistent block sizes");
  const Mat lead = std::sqrt(alpha_c) * Mat::Identity(nl, nl) +
                   std::sqrt(alpha_m) * h_m.lower;
  const Mat m_si =
      alpha_m * (h_m.upper.adjoint() * h_m.upper) + lead.adjoint() * lead;
  const double tr =
      alpha_ii * detail::real_trace(detail::gram_sum(h_own_an) * s_own_an) +
      alpha_ij * detail::real_trace(detail::gram_sum(h_peer_an) * s_peer_an) +
      alpha_b * detail::real_trace(detail::gram_sum(h_s) * x_peer) +
      detail::real_trace(m_si * x_own);
  EnergyReport r;
  r.beta = beta;
  r.e_tx = p;
  r.exact = beta * (1.0 - rho) / static_cast<double>(nl) * tr;
  r.approx = beta * alpha_c * (1.0 - rho) * p;
  r.eta_e = r.exact / p;
  return r;
}

}  // namespace fdsim
