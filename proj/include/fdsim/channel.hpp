#pragma once

#include <cmath>

#include "fdsim/common.hpp"
#include "fdsim/rng.hpp"
#include "fdsim/signal_core.hpp"

namespace fdsim {

// Exponentially decaying tap variances, normalized to unit total power so the
// path-loss factors alone carry the average link gain.
struct PowerDelayProfile {
  RealVec variances;  // l+1 entries
  double decay_ratio = 0.0;
};

inline PowerDelayProfile exp_pdp(int l, double decay_ratio) {
  if (l < 0) throw ConfigError("exp_pdp: l must be >= 0");
  if (!(decay_ratio > 0.0)) throw ConfigError("exp_pdp: decay_ratio must be positive");
  PowerDelayProfile pdp;
  pdp.decay_ratio = decay_ratio;
  pdp.variances.resize(l + 1);
  for (int n = 0; n <= l; ++n)
    pdp.variances(n) = std::exp(-decay_ratio * static_cast<double>(n));
  pdp.variances /= pdp.variances.sum();
  return pdp;
}

struct ChannelTaps {
  Vec taps;  // h(0..l)
};

inline ChannelTaps sample_taps(const PowerDelayProfile& pdp, Rng& rng) {
  ChannelTaps t;
  t.taps.resize(pdp.variances.size());
  for (Eigen::Index n = 0; n < pdp.variances.size(); ++n)
    t.taps(n) = rng.cgauss(pdp.variances(n));
  return t;
}

// Circulant convolution operator for one (N+L)-sample block, split into the
// causal lower-triangular part (ISI) and the wrap-around upper part (IBI,
// top-right l x l triangle). full = lower + upper entrywise exactly.
struct ConvolutionPair {
  Mat full;
  Mat lower;
  Mat upper;
};

inline ConvolutionPair convolution_matrices(const ChannelTaps& taps, int block) {
  const int lp1 = static_cast<int>(taps.taps.size());
  if (lp1 > block)
    throw DimensionMismatch("convolution_matrices: more taps than block length");
  ConvolutionPair p;
  p.lower = Mat::Zero(block, block);
  p.upper = Mat::Zero(block, block);
  for (int k = 0; k < lp1; ++k) {
    for (int m = k; m < block; ++m) p.lower(m, m - k) = taps.taps(k);
    // wrap-around: row m, column m - k + block for m < k
    for (int m = 0; m < k; ++m) p.upper(m, m - k + block) = taps.taps(k);
  }
  p.full = p.lower + p.upper;
  return p;
}

// h_tilde = sqrt(N) F [h; 0]: the N-point frequency response.
inline Vec freq_response(const ChannelTaps& taps, const OfdmGrid& grid) {
  const int n = grid.n_subcarriers;
  if (taps.taps.size() > n)
    throw DimensionMismatch("freq_response: more taps than subcarriers");
  Vec padded = Vec::Zero(n);
  padded.head(taps.taps.size()) = taps.taps;
  return std::sqrt(static_cast<double>(n)) * (dft_matrix(n) * padded);
}

// Indoor path loss, exponent-2 family: PL(dB) = 20 log10(f_MHz)
// + 20 log10(d_m) - 28. Returns the linear power gain.
inline double indoor_path_loss(double f_c_hz, double d_m, double exponent = 2.0) {
  if (!(f_c_hz > 0.0)) throw ConfigError("indoor_path_loss: f_c must be positive");
  if (!(d_m >= 1.0)) throw ConfigError("indoor_path_loss: model requires d >= 1 m");
  const double pl_db =
      20.0 * std::log10(f_c_hz / 1.0e6) + 10.0 * exponent * std::log10(d_m) - 28.0;
  return std::pow(10.0, -pl_db / 10.0);
}

inline double dbm_to_linear(double p_dbm) {
  return std::pow(10.0, (p_dbm - 30.0) / 10.0);
}

inline double linear_to_dbm(double p_watts) {
  if (!(p_watts > 0.0)) throw ConfigError("linear_to_dbm: power must be positive");
  return 10.0 * std::log10(p_watts) + 30.0;
}

inline double db_to_linear(double v_db) { return std::pow(10.0, v_db / 10.0); }

inline double linear_to_db(double v) {
  if (!(v > 0.0)) throw ConfigError("linear_to_db: value must be positive");
  return 10.0 * std::log10(v);
}

// Linear power gains of every link in the four-node scenario.
struct LinkBudget {
  double alpha_11 = 1.0, alpha_12 = 1.0, alpha_21 = 1.0, alpha_22 = 1.0;
  double alpha_b = 1.0;  // node-to-node signaling link
  double alpha_c = 1.0;  // circulator leakage ratio
  double alpha_m = 1.0;  // multipath self-interference gain

  void validate() const {
    for (double a : {alpha_11, alpha_12, alpha_21, alpha_22, alpha_b, alpha_c, alpha_m})
      if (!(a > 0.0) || a > 1.0)
        throw ConfigError("LinkBudget: gains must lie in (0, 1]");
  }
};

}  // namespace fdsim
