#pragma once

#include <cmath>

#include "fdsim/common.hpp"
#include "fdsim/rx_whitening.hpp"
#include "fdsim/signal_core.hpp"

namespace fdsim {

enum class PhaseKind { Forward, Backward };
enum class LinkKind { Ofdma, Signaling };

struct PowerAllocation {
  RealVec per_channel;
  double water_level = 0.0;
  double budget = 0.0;
};

// Water-filling over parallel channels: p_n = (kappa - 1/g_n)^+, with kappa
// found by bisection until the budget matches to 1e-12 relative.
inline PowerAllocation waterfill(const RealVec& gains, double budget) {
  if (!(budget >= 0.0)) throw ConfigError("waterfill: budget must be >= 0");
  PowerAllocation a;
  a.budget = budget;
  a.per_channel = RealVec::Zero(gains.size());
  a.water_level = 0.0;
  if (budget == 0.0) return a;
  double inv_min = std::numeric_limits<double>::infinity();
  double inv_max = 0.0;
  bool any = false;
  for (Eigen::Index n = 0; n < gains.size(); ++n) {
    if (gains(n) > 0.0) {
      any = true;
      inv_min = std::min(inv_min, 1.0 / gains(n));
      inv_max = std::max(inv_max, 1.0 / gains(n));
    }
  }
  if (!any) throw AllGainsZero("waterfill: no channel has positive gain");
  auto allocated = [&](double kappa) {
    double sum = 0.0;
    for (Eigen::Index n = 0; n < gains.size(); ++n)
      if (gains(n) > 0.0) sum += std::max(kappa - 1.0 / gains(n), 0.0);
    return sum;
  };
  double lo = inv_min;
  double hi = budget + inv_max;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (allocated(mid) > budget)
      hi = mid;
    else
      lo = mid;
    if (std::abs(allocated(0.5 * (lo + hi)) - budget) <= 1e-12 * budget) break;
  }
  a.water_level = 0.5 * (lo + hi);
  for (Eigen::Index n = 0; n < gains.size(); ++n)
    if (gains(n) > 0.0)
      a.per_channel(n) = std::max(a.water_level - 1.0 / gains(n), 0.0);
  return a;
}

struct RateReport {
  double rate = 0.0;  // bits per channel use, includes the 1/(N+L) factor
  PhaseKind phase = PhaseKind::Forward;
  LinkKind link = LinkKind::Ofdma;
  SiRegime regime = SiRegime::NoResidualSI;
  double rho = 0.0;
};

struct OfdmaRateResult {
  RateReport report;
  RealVec power_per_carrier;  // length N, zero off the node's set
};

struct SignalingRateResult {
  RateReport report;
  RealVec power_per_stream;
};

struct BackwardOfdmResult {
  RateReport report;
  RealVec power_per_channel;  // WF powers over carriers (no SI) or eigenchannels
  Mat tx_cov;                 // N x N transmit covariance of the attached node
};

namespace detail {

inline double sum_log_rate(const RealVec& gains, const RealVec& powers,
                           int block_len) {
  double s = 0.0;
  for (Eigen::Index n = 0; n < gains.size(); ++n)
    s += std::log2(1.0 + gains(n) * powers(n));
  return s / static_cast<double>(block_len);
}

// Budget > 0 with all-zero gains happens at rho = 0: the transmitter still
// radiates, so spread the budget uniformly and report zero rate.
inline RealVec allocate_or_uniform(const RealVec& gains, double budget,
                                   double* water_level) {
  bool any = false;
  for (Eigen::Index n = 0; n < gains.size(); ++n) any |= gains(n) > 0.0;
  if (!any) {
    *water_level = 0.0;
    if (gains.size() == 0) return RealVec();
    return RealVec::Constant(gains.size(),
                             budget / static_cast<double>(gains.size()));
  }
  PowerAllocation a = waterfill(gains, budget);
  *water_level = a.water_level;
  return a.per_channel;
}

}  // namespace detail

// Downlink OFDMA rate to the attached node (no divider at that receiver, so
// no rho): WF over the node's carriers with budget N * P_o.
inline OfdmaRateResult rate_forward_ofdma(const Vec& h_tilde, double alpha_ii,
                                          double p_o, double n0,
                                          const OfdmOps& ops, int i) {
  const auto& set = ops.grid.set_of(i);
  RealVec gains(static_cast<Eigen::Index>(set.size()));
  for (size_t k = 0; k < set.size(); ++k)
    gains(static_cast<Eigen::Index>(k)) =
        alpha_ii * std::norm(h_tilde(set[k])) / n0;
  const double budget = static_cast<double>(ops.grid.n_subcarriers) * p_o;
  double kappa = 0.0;
  RealVec p = detail::allocate_or_uniform(gains, budget, &kappa);
  OfdmaRateResult r;
  r.report = {detail::sum_log_rate(gains, p, ops.grid.block_len()),
              PhaseKind::Forward, LinkKind::Ofdma, SiRegime::NoResidualSI,
              0.0};
  r.power_per_carrier = RealVec::Zero(ops.grid.n_subcarriers);
  for (size_t k = 0; k < set.size(); ++k)
    r.power_per_carrier(set[k]) = p(static_cast<Eigen::Index>(k));
  return r;
}

// Node-to-node signaling rate in the forward phase. Without residual SI the
// streams carry WF powers under budget (N+L) P_b; with residual SI the
// protocol fixes a uniform allocation.
inline SignalingRateResult rate_forward_signaling(
    const WhiteningDecomposition& w, SiRegime regime, double rho,
    double alpha_b, double p_b, const OfdmOps& ops) {
  if (regime == SiRegime::Saturated)
    throw SaturatedRegime("rate_forward_signaling: receive chain saturated");
  const int nl = ops.grid.block_len();
  RealVec gains(w.diag_gains.size());
  for (Eigen::Index n = 0; n < gains.size(); ++n)
    gains(n) = rho * alpha_b * w.diag_gains(n) * w.diag_gains(n);
  const double budget = static_cast<double>(nl) * p_b;
  SignalingRateResult r;
  double kappa = 0.0;
  if (regime == SiRegime::NoResidualSI) {
    r.power_per_stream = detail::allocate_or_uniform(gains, budget, &kappa);
  } else {
    r.power_per_stream = RealVec::Constant(
        gains.size(), budget / static_cast<double>(gains.size()));
  }
  r.report = {detail::sum_log_rate(gains, r.power_per_stream, nl),
              PhaseKind::Forward, LinkKind::Signaling, regime, rho};
  return r;
}

// Uplink OFDM rate without residual SI: standard per-carrier WF with the
// node-side divider scaling the receive SNR by rho. Budget N * P_A.
inline BackwardOfdmResult rate_backward_ofdm(const Vec& h_tilde, double rho,
                                             double alpha_ii, double p_a,
                                             double n0, const OfdmOps& ops,
                                             int i) {
  const auto& set = ops.grid.set_of(i);
  RealVec gains(static_cast<Eigen::Index>(set.size()));
  for (size_t k = 0; k < set.size(); ++k)
    gains(static_cast<Eigen::Index>(k)) =
        rho * alpha_ii * std::norm(h_tilde(set[k])) / n0;
  const double budget = static_cast<double>(ops.grid.n_subcarriers) * p_a;
  double kappa = 0.0;
  RealVec p = detail::allocate_or_uniform(gains, budget, &kappa);
  BackwardOfdmResult r;
  r.report = {detail::sum_log_rate(gains, p, ops.grid.block_len()),
              PhaseKind::Backward, LinkKind::Ofdma, SiRegime::NoResidualSI,
              rho};
  r.power_per_channel = p;
  Mat p_nn = Mat::Zero(ops.grid.n_subcarriers, ops.grid.n_subcarriers);
  for (size_t k = 0; k < set.size(); ++k)
    p_nn(set[k], set[k]) = p(static_cast<Eigen::Index>(k));
  r.tx_cov = std::move(p_nn);
  return r;
}

// Uplink OFDM rate with residual SI: WF over the eigenchannels of the
// whitened reduced channel; the attached node's transmit covariance follows
// the right singular basis and is no longer diagonal in the carrier domain.
inline BackwardOfdmResult rate_backward_ofdm(const WhiteningDecomposition& w,
                                             double rho, double alpha_ii,
                                             double p_a, const OfdmOps& ops,
                                             int i) {
  RealVec gains(w.diag_gains.size());
  for (Eigen::Index n = 0; n < gains.size(); ++n)
    gains(n) = rho * alpha_ii * w.diag_gains(n) * w.diag_gains(n);
  const double budget = static_cast<double>(ops.grid.n_subcarriers) * p_a;
  double kappa = 0.0;
  RealVec p = detail::allocate_or_uniform(gains, budget, &kappa);
  BackwardOfdmResult r;
  r.report = {detail::sum_log_rate(gains, p, ops.grid.block_len()),
              PhaseKind::Backward, LinkKind::Ofdma, SiRegime::ResidualSI, rho};
  r.power_per_channel = p;
  const Mat& dt = ops.reduced(i);
  r.tx_cov = dt.adjoint() *
             (w.right_basis * p.cast<Complex>().asDiagonal() *
              w.right_basis.adjoint()) *
             dt;
  return r;
}

// Node-to-node signaling rate in the backward phase; budget (N+L) P with WF
// (no SI) or uniform over the N+L-|set_j| streams (residual SI).
inline SignalingRateResult rate_backward_signaling(
    const WhiteningDecomposition& w, SiRegime regime, double rho,
    double alpha_b, double p, const OfdmOps& ops) {
  if (regime == SiRegime::Saturated)
    throw SaturatedRegime("rate_backward_signaling: receive chain saturated");
  const int nl = ops.grid.block_len();
  RealVec gains(w.diag_gains.size());
  for (Eigen::Index n = 0; n < gains.size(); ++n)
    gains(n) = rho * alpha_b * w.diag_gains(n) * w.diag_gains(n);
  const double budget = static_cast<double>(nl) * p;
  SignalingRateResult r;
  double kappa = 0.0;
  if (regime == SiRegime::NoResidualSI) {
    r.power_per_stream = detail::allocate_or_uniform(gains, budget, &kappa);
  } else {
    r.power_per_stream = RealVec::Constant(
        gains.size(), budget / static_cast<double>(gains.size()));
  }
  r.report = {detail::sum_log_rate(gains, r.power_per_stream, nl),
              PhaseKind::Backward, LinkKind::Signaling, regime, rho};
  return r;
}

}  // namespace fdsim
