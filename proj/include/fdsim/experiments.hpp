#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fdsim/approximation.hpp"
#include "fdsim/channel.hpp"
#include "fdsim/common.hpp"
#include "fdsim/energy.hpp"
#include "fdsim/precoding.hpp"
#include "fdsim/rates.hpp"
#include "fdsim/rng.hpp"
#include "fdsim/rx_whitening.hpp"
#include "fdsim/signal_core.hpp"

#ifndef FDSIM_VERSION
#define FDSIM_VERSION "unknown"
#endif

namespace fdsim {

enum class PhaseSelect { Forward, Backward, Both };

inline double nan_value() { return std::numeric_limits<double>::quiet_NaN(); }

// Every scalar of the scenario. Distances in meters, powers in dBm, gains in
// dB, carrier in Hz. p_a_dbm left unset means the attached nodes transmit
// half the node budget (same per-carrier OFDM power as the forward phase).
struct ScenarioConfig {
  int n_subcarriers = 64;
  int cp_len = 16;
  std::vector<int> set_1;  // empty: contiguous halves
  std::vector<int> set_2;
  double pdp_decay_ratio = 2.5;
  double d_sa_m = 10.0;
  double d_ss_m = 20.0;
  double f_c_hz = 1.8e9;
  double p_dbm = 24.0;
  double p_th_dbm = 20.0;
  double p_sat_dbm = 28.0;
  std::optional<double> p_a_dbm;
  double power_split_fwd = 0.5;  // fraction of P on the OFDM block
  double alpha_c_db = -10.0;
  double alpha_m_db = -35.0;
  double beta = 0.7;
  double n0_dbm = -95.0;
  double backward_p_offset_db = -3.0;
  std::vector<double> rho_grid;    // empty: 41 points on [0, 1]
  std::vector<double> p_grid_dbm;  // empty: 23..28 dBm, 0.5 dB steps
  int n_realizations = 500;
  std::uint64_t seed = 1;
  int max_resample = 64;

  OfdmGrid grid() const {
    if (set_1.empty() && set_2.empty())
      return OfdmGrid::contiguous_halves(n_subcarriers, cp_len);
    OfdmGrid g;
    g.n_subcarriers = n_subcarriers;
    g.cp_len = cp_len;
    g.set_1 = set_1;
    g.set_2 = set_2;
    g.validate();
    return g;
  }

  std::vector<double> rho_axis() const {
    if (!rho_grid.empty()) return rho_grid;
    std::vector<double> g(41);
    for (size_t k = 0; k < g.size(); ++k)
      g[k] = static_cast<double>(k) / 40.0;
    return g;
  }

  std::vector<double> power_axis() const {
    if (!p_grid_dbm.empty()) return p_grid_dbm;
    std::vector<double> g;
    for (int k = 0; k <= 10; ++k) g.push_back(23.0 + 0.5 * k);
    return g;
  }

  void validate() const {
    grid();  // throws on malformed grid/sets
    if (!(pdp_decay_ratio > 0.0))
      throw ConfigError("pdp_decay_ratio must be positive");
    if (!(d_sa_m >= 1.0) || !(d_ss_m >= 1.0))
      throw ConfigError("distances must be >= 1 m");
    if (!(f_c_hz > 0.0)) throw ConfigError("f_c_hz must be positive");
    if (!(p_th_dbm <= p_sat_dbm))
      throw ConfigError("p_th_dbm must not exceed p_sat_dbm");
    if (!(power_split_fwd >= 0.0) || !(power_split_fwd <= 1.0))
      throw ConfigError("power_split_fwd must lie in [0, 1]");
    if (!(beta > 0.0) || !(beta <= 1.0))
      throw ConfigError("beta must lie in (0, 1]");
    for (double r : rho_grid)
      if (!(r >= 0.0) || !(r <= 1.0))
        throw ConfigError("rho_grid values must lie in [0, 1]");
    if (n_realizations <= 0)
      throw ConfigError("n_realizations must be positive");
    if (max_resample < 0) throw ConfigError("max_resample must be >= 0");
    if (p_a_dbm && !(dbm_to_linear(*p_a_dbm) > 0.0))
      throw ConfigError("p_a_dbm invalid");
  }
};

inline void to_json(nlohmann::json& j, const ScenarioConfig& c) {
  j = nlohmann::json{{"n_subcarriers", c.n_subcarriers},
                     {"cp_len", c.cp_len},
                     {"set_1", c.set_1},
                     {"set_2", c.set_2},
                     {"pdp_decay_ratio", c.pdp_decay_ratio},
                     {"d_sa_m", c.d_sa_m},
                     {"d_ss_m", c.d_ss_m},
                     {"f_c_hz", c.f_c_hz},
                     {"p_dbm", c.p_dbm},
                     {"p_th_dbm", c.p_th_dbm},
                     {"p_sat_dbm", c.p_sat_dbm},
                     {"p_a_dbm", nullptr},
                     {"power_split_fwd", c.power_split_fwd},
                     {"alpha_c_db", c.alpha_c_db},
                     {"alpha_m_db", c.alpha_m_db},
                     {"beta", c.beta},
                     {"n0_dbm", c.n0_dbm},
                     {"backward_p_offset_db", c.backward_p_offset_db},
                     {"rho_grid", c.rho_grid},
                     {"p_grid_dbm", c.p_grid_dbm},
                     {"n_realizations", c.n_realizations},
                     {"seed", c.seed},
                     {"max_resample", c.max_resample}};
  if (c.p_a_dbm) j["p_a_dbm"] = *c.p_a_dbm;
}

inline void from_json(const nlohmann::json& j, ScenarioConfig& c) {
  static const std::vector<std::string> known = {
      "n_subcarriers", "cp_len", "set_1", "set_2", "pdp_decay_ratio",
      "d_sa_m", "d_ss_m", "f_c_hz", "p_dbm", "p_th_dbm", "p_sat_dbm",
      "p_a_dbm", "power_split_fwd", "alpha_c_db", "alpha_m_db", "beta",
      "n0_dbm", "backward_p_offset_db", "rho_grid", "p_grid_dbm",
      "n_realizations", "seed", "max_resample"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw ConfigError("unknown config key: " + it.key());
  }
  auto opt = [&](const char* key, auto& field) {
    if (j.contains(key) && !j.at(key).is_null()) j.at(key).get_to(field);
  };
  opt("n_subcarriers", c.n_subcarriers);
  opt("cp_len", c.cp_len);
  opt("set_1", c.set_1);
  opt("set_2", c.set_2);
  opt("pdp_decay_ratio", c.pdp_decay_ratio);
  opt("d_sa_m", c.d_sa_m);
  opt("d_ss_m", c.d_ss_m);
  opt("f_c_hz", c.f_c_hz);
  opt("p_dbm", c.p_dbm);
  opt("p_th_dbm", c.p_th_dbm);
  opt("p_sat_dbm", c.p_sat_dbm);
  if (j.contains("p_a_dbm") && !j.at("p_a_dbm").is_null())
    c.p_a_dbm = j.at("p_a_dbm").get<double>();
  opt("power_split_fwd", c.power_split_fwd);
  opt("alpha_c_db", c.alpha_c_db);
  opt("alpha_m_db", c.alpha_m_db);
  opt("beta", c.beta);
  opt("n0_dbm", c.n0_dbm);
  opt("backward_p_offset_db", c.backward_p_offset_db);
  opt("rho_grid", c.rho_grid);
  opt("p_grid_dbm", c.p_grid_dbm);
  opt("n_realizations", c.n_realizations);
  opt("seed", c.seed);
  opt("max_resample", c.max_resample);
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed config " + path + ": " + e.what());
  }
  ScenarioConfig c = j.get<ScenarioConfig>();
  c.validate();
  return c;
}

// Scenario scalars converted to linear units once.
struct DerivedParams {
  OfdmGrid grid;
  double alpha_sa = 0.0;  // all node-to-attached-node links, distance d_sa
  double alpha_b = 0.0;
  double alpha_c = 0.0;
  double alpha_m = 0.0;
  double beta = 0.0;
  double n0 = 0.0;
  double p_fwd = 0.0, p_o = 0.0, p_b = 0.0;
  double p_bwd = 0.0, p_a = 0.0;
  double p_th = 0.0, p_sat = 0.0;
  double pdp_decay_ratio = 0.0;

  static DerivedParams from(const ScenarioConfig& c) {
    c.validate();
    DerivedParams d;
    d.grid = c.grid();
    d.alpha_sa = indoor_path_loss(c.f_c_hz, c.d_sa_m);
    d.alpha_b = indoor_path_loss(c.f_c_hz, c.d_ss_m);
    d.alpha_c = db_to_linear(c.alpha_c_db);
    d.alpha_m = db_to_linear(c.alpha_m_db);
    d.beta = c.beta;
    d.n0 = dbm_to_linear(c.n0_dbm);
    d.p_fwd = dbm_to_linear(c.p_dbm);
    d.p_o = c.power_split_fwd * d.p_fwd;
    d.p_b = (1.0 - c.power_split_fwd) * d.p_fwd;
    d.p_bwd = dbm_to_linear(c.p_dbm + c.backward_p_offset_db);
    d.p_a = c.p_a_dbm ? dbm_to_linear(*c.p_a_dbm) : 0.5 * d.p_fwd;
    d.p_th = dbm_to_linear(c.p_th_dbm);
    d.p_sat = dbm_to_linear(c.p_sat_dbm);
    d.pdp_decay_ratio = c.pdp_decay_ratio;
    return d;
  }
};

// One channel draw with its precoders; evaluates every rate and energy at any
// splitting ratio. Rates in a saturated regime evaluate to zero (the chain
// cannot decode), while transmit covariances and recycled energy remain
// defined.
class Realization {
 public:
  Realization(const DerivedParams& params,
              std::shared_ptr<const OfdmOps> ops, std::uint64_t stream_seed)
      : prm_(params), ops_(std::move(ops)) {
    Rng rng(stream_seed);
    const PowerDelayProfile pdp =
        exp_pdp(prm_.grid.cp_len, prm_.pdp_decay_ratio);
    const int nl = prm_.grid.block_len();
    auto draw = [&] {
      ChannelTaps t = sample_taps(pdp, rng);
      return std::make_pair(convolution_matrices(t, nl), t);
    };
    // fixed draw order: the four node/attached-node links, the node-to-node
    // link, then the two multipath echoes
    std::tie(h_[0], taps_[0]) = draw();  // h_11
    std::tie(h_[1], taps_[1]) = draw();  // h_22
    std::tie(h_[2], taps_[2]) = draw();  // h_12
    std::tie(h_[3], taps_[3]) = draw();  // h_21
    std::tie(h_s_, taps_s_) = draw();
    std::tie(h_m_[0], taps_m_[0]) = draw();
    std::tie(h_m_[1], taps_m_[1]) = draw();
    ht_[0] = freq_response(taps_[0], prm_.grid);
    ht_[1] = freq_response(taps_[1], prm_.grid);
    gamma_f_[0] = forward_nullspace(h_[0], h_[2], *ops_, 1);
    gamma_f_[1] = forward_nullspace(h_[1], h_[3], *ops_, 2);
    gamma_b_[0] = backward_nullspace(h_s_, *ops_, 1);
    gamma_b_[1] = backward_nullspace(h_s_, *ops_, 2);
    for (int i = 0; i < 2; ++i) {
      fwd_ofdma_[i] = rate_forward_ofdma(ht_[i], prm_.alpha_sa, prm_.p_o,
                                         prm_.n0, *ops_, i + 1);
      Mat p_nn = Mat::Zero(prm_.grid.n_subcarriers, prm_.grid.n_subcarriers);
      for (int k = 0; k < prm_.grid.n_subcarriers; ++k)
        p_nn(k, k) = fwd_ofdma_[i].power_per_carrier(k);
      fwd_ofdm_diag_[i] = p_nn;
      fwd_ofdm_block_cov_[i] = ofdm_tx_block_cov(*ops_, p_nn);
    }
  }

  const DerivedParams& params() const { return prm_; }
  const OfdmOps& ops() const { return *ops_; }
  const Precoder& forward_precoder(int i) const { return gamma_f_[i - 1]; }
  const Precoder& backward_precoder(int i) const { return gamma_b_[i - 1]; }
  const ConvolutionPair& node_channel() const { return h_s_; }

  double forward_ofdma_rate(int i) const {
    return fwd_ofdma_[i - 1].report.rate;
  }

  struct ForwardEval {
    SiRegime regime = SiRegime::NoResidualSI;
    std::array<double, 2> r_sig{};   // signaling rate of node i's streams
    std::array<double, 2> r_ofdma{}; // rho-independent downlink rates
    std::array<EnergyReport, 2> energy{};
  };

  ForwardEval forward_eval(double rho) const {
    const SiRegime regime =
        residual_si(rho, prm_.p_fwd, prm_.p_th, prm_.p_sat, prm_.n0).regime;
    const int nl = prm_.grid.block_len();
    ForwardEval ev;
    ev.regime = regime;
    std::array<Mat, 2> x_sig;
    for (int i = 0; i < 2; ++i) {
      ev.r_ofdma[i] = fwd_ofdma_[i].report.rate;
      const int j = 1 - i;
      if (regime == SiRegime::Saturated) {
        ev.r_sig[i] = 0.0;
        const double per_stream = static_cast<double>(nl) * prm_.p_b /
                                  static_cast<double>(gamma_f_[i].streams);
        x_sig[i] = per_stream *
                   (gamma_f_[i].gamma * gamma_f_[i].gamma.adjoint());
        continue;
      }
      WhiteningDecomposition w =
          regime == SiRegime::NoResidualSI
              ? forward_signaling_cov_no_si(h_s_, fwd_ofdm_diag_[i],
                                            gamma_f_[i].gamma, rho,
                                            prm_.alpha_b, prm_.n0, *ops_)
              : forward_signaling_cov_with_si(
                    h_s_, fwd_ofdm_diag_[i], fwd_ofdm_diag_[j],
                    gamma_f_[i].gamma, gamma_f_[j].gamma, rho, prm_.alpha_b,
                    prm_.n0, prm_.p_th, prm_.p_b, *ops_);
      SignalingRateResult res =
          rate_forward_signaling(w, regime, rho, prm_.alpha_b, prm_.p_b, *ops_);
      ev.r_sig[i] = res.report.rate;
      const Mat c = rotation_from_svd(w);
      x_sig[i] = gamma_f_[i].gamma *
                 (c * res.power_per_stream.cast<Complex>().asDiagonal() *
                  c.adjoint()) *
                 gamma_f_[i].gamma.adjoint();
    }
    for (int i = 0; i < 2; ++i) {
      const int j = 1 - i;
      const Mat x_own = fwd_ofdm_block_cov_[i] + x_sig[i];
      const Mat x_peer = fwd_ofdm_block_cov_[j] + x_sig[j];
      ev.energy[i] =
          energy_forward(h_s_, h_m_[i], x_own, x_peer, rho, prm_.beta,
                         prm_.alpha_b, prm_.alpha_c, prm_.alpha_m, prm_.p_fwd);
    }
    return ev;
  }

  double forward_signaling_rate(double rho, int i) const {
    const SiRegime regime =
        residual_si(rho, prm_.p_fwd, prm_.p_th, prm_.p_sat, prm_.n0).regime;
    if (regime == SiRegime::Saturated) return 0.0;
    const int idx = i - 1;
    const int j = 1 - idx;
    WhiteningDecomposition w =
        regime == SiRegime::NoResidualSI
            ? forward_signaling_cov_no_si(h_s_, fwd_ofdm_diag_[idx],
                                          gamma_f_[idx].gamma, rho,
                                          prm_.alpha_b, prm_.n0, *ops_)
            : forward_signaling_cov_with_si(
                  h_s_, fwd_ofdm_diag_[idx], fwd_ofdm_diag_[j],
                  gamma_f_[idx].gamma, gamma_f_[j].gamma, rho, prm_.alpha_b,
                  prm_.n0, prm_.p_th, prm_.p_b, *ops_);
    return rate_forward_signaling(w, regime, rho, prm_.alpha_b, prm_.p_b,
                                  *ops_)
        .report.rate;
  }

  struct BackwardEval {
    SiRegime regime = SiRegime::NoResidualSI;
    std::array<double, 2> r_ofdm{};
    std::array<double, 2> r_sig{};
    std::array<EnergyReport, 2> energy{};
  };

  BackwardEval backward_eval(double rho) const {
    const SiRegime regime =
        residual_si(rho, prm_.p_bwd, prm_.p_th, prm_.p_sat, prm_.n0).regime;
    const int nl = prm_.grid.block_len();
    BackwardEval ev;
    ev.regime = regime;
    std::array<Mat, 2> an_tx;   // N x N subcarrier covariances
    std::array<Mat, 2> sn_sig;  // (N+L) x (N+L) signaling covariances
    for (int i = 0; i < 2; ++i) {
      BackwardOfdmResult res = backward_ofdm_link(rho, regime, i);
      ev.r_ofdm[i] = res.report.rate;
      an_tx[i] = std::move(res.tx_cov);
    }
    for (int i = 0; i < 2; ++i) {
      const int j = 1 - i;
      if (regime == SiRegime::Saturated) {
        ev.r_sig[i] = 0.0;
        const double per_stream = static_cast<double>(nl) * prm_.p_bwd /
                                  static_cast<double>(gamma_b_[i].streams);
        sn_sig[i] = per_stream *
                    (gamma_b_[i].gamma * gamma_b_[i].gamma.adjoint());
        continue;
      }
      // decoding node i's streams at node j; the interfering uplink block is
      // the one transmitted by node i's attached node, seen through h_ji
      WhiteningDecomposition w = backward_signaling_cov(
          cross_channel_to(i), h_s_, an_tx[i], gamma_b_[i].gamma,
          gamma_b_[j].gamma, rho, prm_.alpha_sa, prm_.n0, regime, prm_.p_th,
          prm_.p_bwd, *ops_);
      SignalingRateResult res = rate_backward_signaling(
          w, regime, rho, prm_.alpha_b, prm_.p_bwd, *ops_);
      ev.r_sig[i] = res.report.rate;
      const Mat c = rotation_from_svd(w);
      sn_sig[i] = gamma_b_[i].gamma *
                  (c * res.power_per_stream.cast<Complex>().asDiagonal() *
                   c.adjoint()) *
                  gamma_b_[i].gamma.adjoint();
    }
    for (int i = 0; i < 2; ++i) {
      const int j = 1 - i;
      const Mat s_own = ofdm_tx_block_cov(*ops_, an_tx[i]);
      const Mat s_peer = ofdm_tx_block_cov(*ops_, an_tx[j]);
      // at node 1 the own attached node arrives via h_11 and the peer's via
      // h_12; at node 2 via h_22 and h_21
      const ConvolutionPair& h_own = h_[i];
      const ConvolutionPair& h_peer = h_[2 + i];
      ev.energy[i] = energy_backward(
          h_own, h_peer, h_s_, h_m_[i], s_own, s_peer, sn_sig[i], sn_sig[j],
          rho, prm_.beta, prm_.alpha_sa, prm_.alpha_sa, prm_.alpha_b,
          prm_.alpha_c, prm_.alpha_m, prm_.p_bwd);
    }
    return ev;
  }

  double backward_ofdm_rate(double rho, int i) const {
    const SiRegime regime =
        residual_si(rho, prm_.p_bwd, prm_.p_th, prm_.p_sat, prm_.n0).regime;
    return backward_ofdm_link(rho, regime, i - 1).report.rate;
  }

  double backward_signaling_rate(double rho, int i) const {
    const SiRegime regime =
        residual_si(rho, prm_.p_bwd, prm_.p_th, prm_.p_sat, prm_.n0).regime;
    if (regime == SiRegime::Saturated) return 0.0;
    const int idx = i - 1;
    const int j = 1 - idx;
    BackwardOfdmResult own_an = backward_ofdm_link(rho, regime, idx);
    WhiteningDecomposition w = backward_signaling_cov(
        cross_channel_to(idx), h_s_, own_an.tx_cov, gamma_b_[idx].gamma,
        gamma_b_[j].gamma, rho, prm_.alpha_sa, prm_.n0, regime, prm_.p_th,
        prm_.p_bwd, *ops_);
    return rate_backward_signaling(w, regime, rho, prm_.alpha_b, prm_.p_bwd,
                                   *ops_)
        .report.rate;
  }

 private:
  // Channel from node j's receiver to node i's attached node, i 0-based:
  // decoding at node 2 sees attached node 1 through h_21 and vice versa.
  const ConvolutionPair& cross_channel_to(int i) const {
    return i == 0 ? h_[3] : h_[2];
  }

  BackwardOfdmResult backward_ofdm_link(double rho, SiRegime regime,
                                        int i) const {
    if (regime == SiRegime::Saturated) {
      // the attached node still radiates; spread its budget uniformly
      BackwardOfdmResult res;
      const auto& set = prm_.grid.set_of(i + 1);
      const double per_carrier =
          static_cast<double>(prm_.grid.n_subcarriers) * prm_.p_a /
          static_cast<double>(set.size());
      Mat p_nn = Mat::Zero(prm_.grid.n_subcarriers, prm_.grid.n_subcarriers);
      for (int k : set) p_nn(k, k) = per_carrier;
      res.report = {0.0, PhaseKind::Backward, LinkKind::Ofdma,
                    SiRegime::Saturated, rho};
      res.power_per_channel =
          RealVec::Constant(static_cast<Eigen::Index>(set.size()),
                            per_carrier);
      res.tx_cov = std::move(p_nn);
      return res;
    }
    if (regime == SiRegime::NoResidualSI)
      return rate_backward_ofdm(ht_[i], rho, prm_.alpha_sa, prm_.p_a, prm_.n0,
                                *ops_, i + 1);
    WhiteningDecomposition w = backward_ofdm_cov_with_si(
        gamma_b_[i].gamma, ht_[i], rho, prm_.n0, prm_.p_th, prm_.p_bwd,
        *ops_, i + 1);
    return rate_backward_ofdm(w, rho, prm_.alpha_sa, prm_.p_a, *ops_, i + 1);
  }

  DerivedParams prm_;
  std::shared_ptr<const OfdmOps> ops_;
  std::array<ConvolutionPair, 4> h_;  // h_11, h_22, h_12, h_21
  std::array<ChannelTaps, 4> taps_;
  ConvolutionPair h_s_;
  ChannelTaps taps_s_;
  std::array<ConvolutionPair, 2> h_m_;
  std::array<ChannelTaps, 2> taps_m_;
  std::array<Vec, 2> ht_;
  std::array<Precoder, 2> gamma_f_;
  std::array<Precoder, 2> gamma_b_;
  std::array<OfdmaRateResult, 2> fwd_ofdma_;
  std::array<Mat, 2> fwd_ofdm_diag_;
  std::array<Mat, 2> fwd_ofdm_block_cov_;
};

// Builds a realization, resampling degenerate draws (numerical null-space
// dimension off) up to max_resample times with derived attempt seeds.
inline std::unique_ptr<Realization> build_realization(
    const DerivedParams& params, std::shared_ptr<const OfdmOps> ops,
    std::uint64_t draw_seed, int max_resample, int* resamples) {
  for (int attempt = 0;; ++attempt) {
    try {
      auto r = std::make_unique<Realization>(
          params, ops, mix_seed(draw_seed, static_cast<std::uint64_t>(attempt)));
      if (resamples) *resamples = attempt;
      return r;
    } catch (const NullspaceDimensionMismatch&) {
      if (attempt >= max_resample) throw;
    }
  }
}

struct LinkMetrics {
  double rate = 0.0;
  double baseline = 0.0;
  double eta_r = 0.0;
};

struct PhaseReport {
  double rho = 0.0;
  SiRegime regime = SiRegime::NoResidualSI;
  std::array<LinkMetrics, 2> ofdma;
  std::array<LinkMetrics, 2> signaling;
  std::array<EnergyReport, 2> energy;
  std::array<double, 2> eta_e{};
  int resamples = 0;
};

struct RealizationOutput {
  PhaseReport forward;
  PhaseReport backward;
};

namespace detail {

inline double ratio_or_nan(double num, double den) {
  if (den == 0.0) return num == 0.0 ? nan_value() : nan_value();
  return num / den;
}

}  // namespace detail

// One draw evaluated at the given rho with the rho = 1 baseline on the same
// channels. run_realization(config, 1.0, seed) has eta_r identically 1 and
// eta_e identically 0.
inline RealizationOutput run_realization(const ScenarioConfig& cfg, double rho,
                                         std::uint64_t draw_seed) {
  const DerivedParams prm = DerivedParams::from(cfg);
  auto ops = std::make_shared<const OfdmOps>(OfdmOps::build(prm.grid));
  int resamples = 0;
  auto r = build_realization(prm, ops, draw_seed, cfg.max_resample, &resamples);

  RealizationOutput out;
  {
    const auto ev = r->forward_eval(rho);
    const auto base = r->forward_eval(1.0);
    PhaseReport& ph = out.forward;
    ph.rho = rho;
    ph.regime = ev.regime;
    ph.resamples = resamples;
    for (int i = 0; i < 2; ++i) {
      ph.ofdma[i] = {ev.r_ofdma[i], base.r_ofdma[i],
                     detail::ratio_or_nan(ev.r_ofdma[i], base.r_ofdma[i])};
      ph.signaling[i] = {ev.r_sig[i], base.r_sig[i],
                         detail::ratio_or_nan(ev.r_sig[i], base.r_sig[i])};
      ph.energy[i] = ev.energy[i];
      ph.eta_e[i] = ev.energy[i].eta_e;
    }
  }
  {
    const auto ev = r->backward_eval(rho);
    const auto base = r->backward_eval(1.0);
    PhaseReport& ph = out.backward;
    ph.rho = rho;
    ph.regime = ev.regime;
    ph.resamples = resamples;
    for (int i = 0; i < 2; ++i) {
      ph.ofdma[i] = {ev.r_ofdm[i], base.r_ofdm[i],
                     detail::ratio_or_nan(ev.r_ofdm[i], base.r_ofdm[i])};
      ph.signaling[i] = {ev.r_sig[i], base.r_sig[i],
                         detail::ratio_or_nan(ev.r_sig[i], base.r_sig[i])};
      ph.energy[i] = ev.energy[i];
      ph.eta_e[i] = ev.energy[i].eta_e;
    }
  }
  return out;
}

// Work queue over realization indices. Results must be written to
// per-index slots; with that discipline the output is independent of the
// thread count and schedule.
inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex err_mutex;
  auto work = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("FD_SIM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  return 1;
}

struct SweepResult {
  std::string kind;       // "rho" or "power"
  std::string axis_name;  // "rho" or "p_dbm"
  std::vector<double> axis;
  std::vector<std::pair<std::string, std::vector<double>>> columns;
  nlohmann::json config_echo;
  std::uint64_t seed = 0;
  int n_realizations = 0;
  long long total_resamples = 0;
  bool flagged = false;  // resample fraction at or above 0.1%

  const std::vector<double>* column(const std::string& name) const {
    for (const auto& c : columns)
      if (c.first == name) return &c.second;
    return nullptr;
  }
};

namespace detail {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

// Sequential, index-ordered reduction; any NaN sample poisons the statistic
// on purpose (saturated or undefined points must stay visible).
inline MeanSe mean_se(const std::vector<double>& samples) {
  MeanSe r;
  const size_t m = samples.size();
  if (m == 0) {
    r.mean = r.se = nan_value();
    return r;
  }
  double sum = 0.0;
  for (double x : samples) sum += x;
  r.mean = sum / static_cast<double>(m);
  if (m == 1) {
    r.se = 0.0;
    return r;
  }
  double acc = 0.0;
  for (double x : samples) acc += (x - r.mean) * (x - r.mean);
  r.se = std::sqrt(acc / (static_cast<double>(m - 1) * static_cast<double>(m)));
  return r;
}

inline void push_mean_se(SweepResult& res, const std::string& name,
                         std::vector<std::vector<double>>& per_point) {
  std::vector<double> mean, se;
  mean.reserve(per_point.size());
  se.reserve(per_point.size());
  for (auto& samples : per_point) {
    const MeanSe ms = mean_se(samples);
    mean.push_back(ms.mean);
    se.push_back(ms.se);
  }
  res.columns.emplace_back(name + "_mean", std::move(mean));
  res.columns.emplace_back(name + "_se", std::move(se));
}

}  // namespace detail

// Per-draw record for the rho sweep. Both node links contribute as separate
// samples of the same symmetric statistic.
struct RhoDrawRecord {
  std::vector<std::array<double, 2>> eta_fwd_sig;
  std::vector<std::array<double, 2>> fit_fwd_sig;
  std::vector<std::array<double, 2>> eta_bwd_ofdm;
  std::vector<std::array<double, 2>> fit_bwd_ofdm;
  std::vector<std::array<double, 2>> eta_bwd_sig;
  std::vector<std::array<double, 2>> fit_bwd_sig;
  std::vector<std::array<double, 2>> eta_e_fwd;
  std::vector<std::array<double, 2>> eta_e_bwd;
  std::vector<double> eta_e_fwd_approx;
  std::vector<double> eta_e_bwd_approx;
  std::array<double, 2> cross_fwd_sig{};
  std::array<double, 2> cross_bwd_ofdm{};
  std::array<double, 2> cross_bwd_sig{};
  std::array<double, 2> c_fwd_sig_nosi{}, phi_fwd_sig_nosi{};
  std::array<double, 2> c_fwd_sig_si{}, phi_fwd_sig_si{};
  std::array<double, 2> c_bwd_ofdm_nosi{}, phi_bwd_ofdm_nosi{};
  std::array<double, 2> c_bwd_ofdm_si{}, phi_bwd_ofdm_si{};
  std::array<double, 2> c_bwd_sig_nosi{}, phi_bwd_sig_nosi{};
  std::array<double, 2> c_bwd_sig_si{}, phi_bwd_sig_si{};
  int resamples = 0;
};

namespace detail {

struct FitPair {
  std::optional<RateFit> no_si;
  std::optional<RateFit> with_si;
};

// Fit the two regime segments of one link's rate curve on one draw. Segments
// that do not exist at this power are left empty.
inline FitPair fit_link(const std::function<double(double)>& r_fn, double p,
                        double p_th, double p_sat) {
  FitPair fp;
  try {
    fp.no_si = fit_rate_curve(r_fn, SiRegime::NoResidualSI, p, p_th, p_sat);
  } catch (const NumericalError&) {
  }
  if (p > p_th) {
    try {
      fp.with_si = fit_rate_curve(r_fn, SiRegime::ResidualSI, p, p_th, p_sat);
    } catch (const NumericalError&) {
    }
  }
  return fp;
}

inline double fit_pair_eval(const FitPair& fp, double rho, double p,
                            double p_th, double p_sat) {
  if (rho <= p_th / p) {
    if (fp.no_si) return fit_eval(*fp.no_si, rho);
    return nan_value();
  }
  if (rho <= std::min(1.0, p_sat / p)) {
    if (fp.with_si) return fit_eval(*fp.with_si, rho);
    return nan_value();
  }
  return nan_value();
}

inline double crossover_or_nan(const FitPair& fp, double baseline, double p,
                               double p_th, double p_sat) {
  if (!fp.no_si) return nan_value();
  try {
    const CrossoverInterval ci =
        crossover_interval(*fp.no_si, baseline, p, p_th, p_sat);
    return ci.valid ? ci.lower : nan_value();
  } catch (const NumericalError&) {
    return nan_value();
  }
}

inline void store_fit_params(const FitPair& fp, double* c_nosi,
                             double* phi_nosi, double* c_si, double* phi_si) {
  *c_nosi = fp.no_si ? fp.no_si->c : nan_value();
  *phi_nosi = fp.no_si ? fp.no_si->phi : nan_value();
  *c_si = fp.with_si ? fp.with_si->c : nan_value();
  *phi_si = fp.with_si ? fp.with_si->phi : nan_value();
}

}  // namespace detail

// Monte Carlo curves over the configured rho grid: numeric eta_R per link,
// the two-point-fit eta_R, recycled-energy fractions, fit parameters, and
// crossover lower bounds.
inline SweepResult sweep_rho(const ScenarioConfig& cfg,
                             PhaseSelect phases = PhaseSelect::Both,
                             int threads = 1) {
  cfg.validate();
  const DerivedParams prm = DerivedParams::from(cfg);
  auto ops = std::make_shared<const OfdmOps>(OfdmOps::build(prm.grid));
  const std::vector<double> axis = cfg.rho_axis();
  const int n_rho = static_cast<int>(axis.size());
  const int n_draws = cfg.n_realizations;
  const bool do_fwd = phases != PhaseSelect::Backward;
  const bool do_bwd = phases != PhaseSelect::Forward;

  std::vector<RhoDrawRecord> records(static_cast<size_t>(n_draws));
  parallel_for(n_draws, threads, [&](int d) {
    RhoDrawRecord rec;
    int resamples = 0;
    auto r = build_realization(prm, ops, mix_seed(cfg.seed, d),
                               cfg.max_resample, &resamples);
    rec.resamples = resamples;
    rec.eta_fwd_sig.resize(n_rho);
    rec.fit_fwd_sig.resize(n_rho);
    rec.eta_bwd_ofdm.resize(n_rho);
    rec.fit_bwd_ofdm.resize(n_rho);
    rec.eta_bwd_sig.resize(n_rho);
    rec.fit_bwd_sig.resize(n_rho);
    rec.eta_e_fwd.resize(n_rho);
    rec.eta_e_bwd.resize(n_rho);
    rec.eta_e_fwd_approx.assign(n_rho, nan_value());
    rec.eta_e_bwd_approx.assign(n_rho, nan_value());

    if (do_fwd) {
      const auto base = r->forward_eval(1.0);
      std::array<detail::FitPair, 2> fits;
      for (int i = 0; i < 2; ++i) {
        fits[i] = detail::fit_link(
            [&, i](double rho) { return r->forward_signaling_rate(rho, i + 1); },
            prm.p_fwd, prm.p_th, prm.p_sat);
        detail::store_fit_params(fits[i], &rec.c_fwd_sig_nosi[i],
                                 &rec.phi_fwd_sig_nosi[i], &rec.c_fwd_sig_si[i],
                                 &rec.phi_fwd_sig_si[i]);
        rec.cross_fwd_sig[i] = detail::crossover_or_nan(
            fits[i], base.r_sig[i], prm.p_fwd, prm.p_th, prm.p_sat);
      }
      for (int k = 0; k < n_rho; ++k) {
        const auto ev = r->forward_eval(axis[static_cast<size_t>(k)]);
        for (int i = 0; i < 2; ++i) {
          rec.eta_fwd_sig[static_cast<size_t>(k)][i] =
              detail::ratio_or_nan(ev.r_sig[i], base.r_sig[i]);
          rec.fit_fwd_sig[static_cast<size_t>(k)][i] =
              detail::fit_pair_eval(fits[i], axis[static_cast<size_t>(k)],
                                    prm.p_fwd, prm.p_th, prm.p_sat) /
              base.r_sig[i];
          rec.eta_e_fwd[static_cast<size_t>(k)][i] = ev.energy[i].eta_e;
        }
        rec.eta_e_fwd_approx[static_cast<size_t>(k)] =
            ev.energy[0].approx / prm.p_fwd;
      }
    }
    if (do_bwd) {
      const auto base = r->backward_eval(1.0);
      std::array<detail::FitPair, 2> ofdm_fits, sig_fits;
      for (int i = 0; i < 2; ++i) {
        ofdm_fits[i] = detail::fit_link(
            [&, i](double rho) { return r->backward_ofdm_rate(rho, i + 1); },
            prm.p_bwd, prm.p_th, prm.p_sat);
        sig_fits[i] = detail::fit_link(
            [&, i](double rho) {
              return r->backward_signaling_rate(rho, i + 1);
            },
            prm.p_bwd, prm.p_th, prm.p_sat);
        detail::store_fit_params(ofdm_fits[i], &rec.c_bwd_ofdm_nosi[i],
                                 &rec.phi_bwd_ofdm_nosi[i],
                                 &rec.c_bwd_ofdm_si[i], &rec.phi_bwd_ofdm_si[i]);
        detail::store_fit_params(sig_fits[i], &rec.c_bwd_sig_nosi[i],
                                 &rec.phi_bwd_sig_nosi[i], &rec.c_bwd_sig_si[i],
                                 &rec.phi_bwd_sig_si[i]);
        rec.cross_bwd_ofdm[i] = detail::crossover_or_nan(
            ofdm_fits[i], base.r_ofdm[i], prm.p_bwd, prm.p_th, prm.p_sat);
        rec.cross_bwd_sig[i] = detail::crossover_or_nan(
            sig_fits[i], base.r_sig[i], prm.p_bwd, prm.p_th, prm.p_sat);
      }
      for (int k = 0; k < n_rho; ++k) {
        const auto ev = r->backward_eval(axis[static_cast<size_t>(k)]);
        for (int i = 0; i < 2; ++i) {
          rec.eta_bwd_ofdm[static_cast<size_t>(k)][i] =
              detail::ratio_or_nan(ev.r_ofdm[i], base.r_ofdm[i]);
          rec.fit_bwd_ofdm[static_cast<size_t>(k)][i] =
              detail::fit_pair_eval(ofdm_fits[i], axis[static_cast<size_t>(k)],
                                    prm.p_bwd, prm.p_th, prm.p_sat) /
              base.r_ofdm[i];
          rec.eta_bwd_sig[static_cast<size_t>(k)][i] =
              detail::ratio_or_nan(ev.r_sig[i], base.r_sig[i]);
          rec.fit_bwd_sig[static_cast<size_t>(k)][i] =
              detail::fit_pair_eval(sig_fits[i], axis[static_cast<size_t>(k)],
                                    prm.p_bwd, prm.p_th, prm.p_sat) /
              base.r_sig[i];
          rec.eta_e_bwd[static_cast<size_t>(k)][i] = ev.energy[i].eta_e;
        }
        rec.eta_e_bwd_approx[static_cast<size_t>(k)] =
            ev.energy[0].approx / prm.p_bwd;
      }
    }
    records[static_cast<size_t>(d)] = std::move(rec);
  });

  SweepResult res;
  res.kind = "rho";
  res.axis_name = "rho";
  res.axis = axis;
  res.config_echo = cfg;
  res.seed = cfg.seed;
  res.n_realizations = n_draws;
  for (const auto& rec : records) res.total_resamples += rec.resamples;
  res.flagged = static_cast<double>(res.total_resamples) >=
                0.001 * static_cast<double>(n_draws);

  auto gather_per_point =
      [&](const std::function<const std::vector<std::array<double, 2>>&(
              const RhoDrawRecord&)>& get) {
        std::vector<std::vector<double>> per_point(
            static_cast<size_t>(n_rho));
        for (int k = 0; k < n_rho; ++k) {
          auto& samples = per_point[static_cast<size_t>(k)];
          samples.reserve(static_cast<size_t>(2 * n_draws));
          for (const auto& rec : records) {
            samples.push_back(get(rec)[static_cast<size_t>(k)][0]);
            samples.push_back(get(rec)[static_cast<size_t>(k)][1]);
          }
        }
        return per_point;
      };
  auto gather_scalar = [&](const std::function<double(
                               const RhoDrawRecord&, int)>& get) {
    std::vector<double> samples;
    samples.reserve(static_cast<size_t>(2 * n_draws));
    for (const auto& rec : records)
      for (int i = 0; i < 2; ++i) samples.push_back(get(rec, i));
    return samples;
  };
  auto push_scalar = [&](const std::string& name,
                         const std::vector<double>& samples) {
    const detail::MeanSe ms = detail::mean_se(samples);
    res.columns.emplace_back(
        name + "_mean", std::vector<double>(static_cast<size_t>(1), ms.mean));
    // scalar summaries are replicated over the axis for a rectangular table
    res.columns.back().second.assign(static_cast<size_t>(n_rho), ms.mean);
    res.columns.emplace_back(name + "_se",
                             std::vector<double>(static_cast<size_t>(n_rho),
                                                 ms.se));
  };

  if (do_fwd) {
    auto pp = gather_per_point(
        [](const RhoDrawRecord& r) -> const std::vector<std::array<double, 2>>& {
          return r.eta_fwd_sig;
        });
    detail::push_mean_se(res, "eta_r_fwd_signaling", pp);
    pp = gather_per_point(
        [](const RhoDrawRecord& r) -> const std::vector<std::array<double, 2>>& {
          return r.fit_fwd_sig;
        });
    detail::push_mean_se(res, "eta_r_fit_fwd_signaling", pp);
    pp = gather_per_point(
        [](const RhoDrawRecord& r) -> const std::vector<std::array<double, 2>>& {
          return r.eta_e_fwd;
        });
    detail::push_mean_se(res, "eta_e_fwd", pp);
    {
      std::vector<std::vector<double>> per_point(static_cast<size_t>(n_rho));
      for (int k = 0; k < n_rho; ++k)
        for (const auto& rec : records)
          per_point[static_cast<size_t>(k)].push_back(
              rec.eta_e_fwd_approx[static_cast<size_t>(k)]);
      detail::push_mean_se(res, "eta_e_fwd_approx", per_point);
    }
    push_scalar("crossover_fwd_signaling",
                gather_scalar([](const RhoDrawRecord& r, int i) {
                  return r.cross_fwd_sig[i];
                }));
    push_scalar("c_fwd_signaling_nosi",
                gather_scalar([](const RhoDrawRecord& r, int i) {
                  return r.c_fwd_sig_nosi[i];
                }));
    push_scalar("phi_fwd_signaling_nosi",
                gather_scalar([](const RhoDrawRecord& r, int i) {
                  return r.phi_fwd_sig_nosi[i];
                }));
    push_scalar("c_fwd_signaling_si",
                gather_scalar([](const RhoDrawRecord& r, int i) {
                  return r.c_fwd_sig_si[i];
                }));
    push_scalar("phi_fwd_signaling_si",
                gather_scalar([](const RhoDrawRecord& r, int i) {
                  return r.phi_fwd_sig_si[i];
                }));
  }
  if (do_bwd) {
    auto pp = gather_per_point(
        [](const RhoDrawRecord& r) -> const std::vector<std::array<double, 2>>& {
          return r.eta_bwd_ofdm;
        });
    detail::push_mean_se(res, "eta_r_bwd_ofdm", pp);
    pp = gather_per_point(
        [](const RhoDrawRecord& r) -> const std::vector<std::array<double, 2>>& {
          return r.fit_bwd_ofdm;
        });
    detail::push_mean_se(res, "eta_r_fit_bwd_ofdm", pp);
    pp = gather_per_point(
        [](const RhoDrawRecord& r) -> const std::vector<std::array<double, 2>>& {
          return r.eta_bwd_sig;
        });
    detail::push_mean_se(res, "eta_r_bwd_signaling", pp);
    pp = gather_per_point(
        [](const RhoDrawRecord& r) -> const std::vector<std::array<double, 2>>& {
          return r.fit_bwd_sig;
        });
    detail::push_mean_se(res, "eta_r_fit_bwd_signaling", pp);
    pp = gather_per_point(
        [](const RhoDrawRecord& r) -> const std::vector<std::array<double, 2>>& {
          return r.eta_e_bwd;
        });
    detail::push_mean_se(res, "eta_e_bwd", pp);
    {
      std::vector<std::vector<double>> per_point(static_cast<size_t>(n_rho));
      for (int k = 0; k < n_rho; ++k)
        for (const auto& rec : records)
          per_point[static_cast<size_t>(k)].push_back(
              rec.eta_e_bwd_approx[static_cast<size_t>(k)]);
      detail::push_mean_se(res, "eta_e_bwd_approx", per_point);
    }
    push_scalar("crossover_bwd_ofdm",
                gather_scalar([](const RhoDrawRecord& r, int i) {
                  return r.cross_bwd_ofdm[i];
                }));
    push_scalar("crossover_bwd_signaling",
                gather_scalar([](const RhoDrawRecord& r, int i) {
                  return r.cross_bwd_sig[i];
                }));
    push_scalar("c_bwd_ofdm_nosi",
                gather_scalar([](const RhoDrawRecord& r, int i) {
                  return r.c_bwd_ofdm_nosi[i];
                }));
    push_scalar("phi_bwd_ofdm_nosi",
                gather_scalar([](const RhoDrawRecord& r, int i) {
                  return r.phi_bwd_ofdm_nosi[i];
                }));
    push_scalar("c_bwd_signaling_nosi",
                gather_scalar([](const RhoDrawRecord& r, int i) {
                  return r.c_bwd_sig_nosi[i];
                }));
    push_scalar("phi_bwd_signaling_nosi",
                gather_scalar([](const RhoDrawRecord& r, int i) {
                  return r.phi_bwd_sig_nosi[i];
                }));
  }
  return res;
}

// Per-draw record for the power sweep: optimum splitting ratio metrics at
// each axis power.
struct PowerDrawRecord {
  std::vector<double> rho_star_fwd;
  std::vector<double> with_si_fwd;
  std::vector<std::array<double, 2>> eta_r_star_fwd_sig;
  std::vector<std::array<double, 2>> eta_e_star_fwd;
  std::vector<double> eta_e_star_fwd_approx;
  std::vector<std::array<double, 2>> cross_fwd_sig;
  std::vector<double> rho_star_bwd;
  std::vector<double> with_si_bwd;
  std::vector<std::array<double, 2>> eta_r_star_bwd_ofdm;
  std::vector<std::array<double, 2>> eta_r_star_bwd_sig;
  std::vector<std::array<double, 2>> eta_e_star_bwd;
  std::vector<double> eta_e_star_bwd_approx;
  std::vector<std::array<double, 2>> cross_bwd_ofdm;
  std::vector<std::array<double, 2>> cross_bwd_sig;
  int resamples = 0;
};

// For each axis power: evaluate both candidate optima (the two regime
// edges), pick per draw the one with the larger summed signaling rate, and
// report eta_R / eta_E there. Channel draws are shared across axis points.
inline SweepResult sweep_power(const ScenarioConfig& cfg,
                               PhaseSelect phases = PhaseSelect::Both,
                               int threads = 1) {
  cfg.validate();
  const std::vector<double> axis = cfg.power_axis();
  const int n_p = static_cast<int>(axis.size());
  const int n_draws = cfg.n_realizations;
  const bool do_fwd = phases != PhaseSelect::Backward;
  const bool do_bwd = phases != PhaseSelect::Forward;

  auto ops = std::make_shared<const OfdmOps>(OfdmOps::build(cfg.grid()));
  std::vector<DerivedParams> prms;
  prms.reserve(static_cast<size_t>(n_p));
  for (double p_dbm : axis) {
    ScenarioConfig sub = cfg;
    sub.p_dbm = p_dbm;
    prms.push_back(DerivedParams::from(sub));
  }

  std::vector<PowerDrawRecord> records(static_cast<size_t>(n_draws));
  parallel_for(n_draws, threads, [&](int d) {
    PowerDrawRecord rec;
    rec.rho_star_fwd.assign(n_p, nan_value());
    rec.with_si_fwd.assign(n_p, nan_value());
    rec.eta_r_star_fwd_sig.resize(n_p);
    rec.eta_e_star_fwd.resize(n_p);
    rec.eta_e_star_fwd_approx.assign(n_p, nan_value());
    rec.cross_fwd_sig.resize(n_p);
    rec.rho_star_bwd.assign(n_p, nan_value());
    rec.with_si_bwd.assign(n_p, nan_value());
    rec.eta_r_star_bwd_ofdm.resize(n_p);
    rec.eta_r_star_bwd_sig.resize(n_p);
    rec.eta_e_star_bwd.resize(n_p);
    rec.eta_e_star_bwd_approx.assign(n_p, nan_value());
    rec.cross_bwd_ofdm.resize(n_p);
    rec.cross_bwd_sig.resize(n_p);

    for (int pi = 0; pi < n_p; ++pi) {
      const DerivedParams& prm = prms[static_cast<size_t>(pi)];
      int resamples = 0;
      auto r = build_realization(prm, ops, mix_seed(cfg.seed, d),
                                 cfg.max_resample, &resamples);
      if (pi == 0) rec.resamples = resamples;

      if (do_fwd) {
        const double r_ns = optimal_rho(prm.p_fwd, prm.p_th, prm.p_sat,
                                        SiRegime::NoResidualSI);
        const double r_ws =
            optimal_rho(prm.p_fwd, prm.p_th, prm.p_sat, SiRegime::ResidualSI);
        const auto base = r->forward_eval(1.0);
        const auto ev_ns = r->forward_eval(r_ns);
        const auto ev_ws = r_ws > r_ns ? r->forward_eval(r_ws) : ev_ns;
        const bool pick_si =
            r_ws > r_ns &&
            ev_ws.r_sig[0] + ev_ws.r_sig[1] > ev_ns.r_sig[0] + ev_ns.r_sig[1];
        const auto& ev = pick_si ? ev_ws : ev_ns;
        rec.rho_star_fwd[static_cast<size_t>(pi)] = pick_si ? r_ws : r_ns;
        rec.with_si_fwd[static_cast<size_t>(pi)] = pick_si ? 1.0 : 0.0;
        for (int i = 0; i < 2; ++i) {
          rec.eta_r_star_fwd_sig[static_cast<size_t>(pi)][i] =
              detail::ratio_or_nan(ev.r_sig[i], base.r_sig[i]);
          rec.eta_e_star_fwd[static_cast<size_t>(pi)][i] =
              ev.energy[i].eta_e;
          const detail::FitPair fits = detail::fit_link(
              [&, i](double rho) {
                return r->forward_signaling_rate(rho, i + 1);
              },
              prm.p_fwd, prm.p_th, prm.p_sat);
          rec.cross_fwd_sig[static_cast<size_t>(pi)][i] =
              detail::crossover_or_nan(fits, base.r_sig[i], prm.p_fwd,
                                       prm.p_th, prm.p_sat);
        }
        rec.eta_e_star_fwd_approx[static_cast<size_t>(pi)] =
            ev.energy[0].approx / prm.p_fwd;
      }
      if (do_bwd) {
        const double r_ns = optimal_rho(prm.p_bwd, prm.p_th, prm.p_sat,
                                        SiRegime::NoResidualSI);
        const double r_ws =
            optimal_rho(prm.p_bwd, prm.p_th, prm.p_sat, SiRegime::ResidualSI);
        const auto base = r->backward_eval(1.0);
        const auto ev_ns = r->backward_eval(r_ns);
        const auto ev_ws = r_ws > r_ns ? r->backward_eval(r_ws) : ev_ns;
        const bool pick_si =
            r_ws > r_ns &&
            ev_ws.r_sig[0] + ev_ws.r_sig[1] > ev_ns.r_sig[0] + ev_ns.r_sig[1];
        const auto& ev = pick_si ? ev_ws : ev_ns;
        rec.rho_star_bwd[static_cast<size_t>(pi)] = pick_si ? r_ws : r_ns;
        rec.with_si_bwd[static_cast<size_t>(pi)] = pick_si ? 1.0 : 0.0;
        for (int i = 0; i < 2; ++i) {
          rec.eta_r_star_bwd_ofdm[static_cast<size_t>(pi)][i] =
              detail::ratio_or_nan(ev.r_ofdm[i], base.r_ofdm[i]);
          rec.eta_r_star_bwd_sig[static_cast<size_t>(pi)][i] =
              detail::ratio_or_nan(ev.r_sig[i], base.r_sig[i]);
          rec.eta_e_star_bwd[static_cast<size_t>(pi)][i] =
              ev.energy[i].eta_e;
          const detail::FitPair ofdm_fits = detail::fit_link(
              [&, i](double rho) { return r->backward_ofdm_rate(rho, i + 1); },
              prm.p_bwd, prm.p_th, prm.p_sat);
          const detail::FitPair sig_fits = detail::fit_link(
              [&, i](double rho) {
                return r->backward_signaling_rate(rho, i + 1);
              },
              prm.p_bwd, prm.p_th, prm.p_sat);
          rec.cross_bwd_ofdm[static_cast<size_t>(pi)][i] =
              detail::crossover_or_nan(ofdm_fits, base.r_ofdm[i], prm.p_bwd,
                                       prm.p_th, prm.p_sat);
          rec.cross_bwd_sig[static_cast<size_t>(pi)][i] =
              detail::crossover_or_nan(sig_fits, base.r_sig[i], prm.p_bwd,
                                       prm.p_th, prm.p_sat);
        }
        rec.eta_e_star_bwd_approx[static_cast<size_t>(pi)] =
            ev.energy[0].approx / prm.p_bwd;
      }
    }
    records[static_cast<size_t>(d)] = std::move(rec);
  });

  SweepResult res;
  res.kind = "power";
  res.axis_name = "p_dbm";
  res.axis = axis;
  res.config_echo = cfg;
  res.seed = cfg.seed;
  res.n_realizations = n_draws;
  for (const auto& rec : records) res.total_resamples += rec.resamples;
  res.flagged = static_cast<double>(res.total_resamples) >=
                0.001 * static_cast<double>(n_draws);

  auto gather_pair = [&](const std::function<const std::vector<
                             std::array<double, 2>>&(const PowerDrawRecord&)>&
                             get) {
    std::vector<std::vector<double>> per_point(static_cast<size_t>(n_p));
    for (int k = 0; k < n_p; ++k) {
      auto& samples = per_point[static_cast<size_t>(k)];
      samples.reserve(static_cast<size_t>(2 * n_draws));
      for (const auto& rec : records) {
        samples.push_back(get(rec)[static_cast<size_t>(k)][0]);
        samples.push_back(get(rec)[static_cast<size_t>(k)][1]);
      }
    }
    return per_point;
  };
  auto gather_one = [&](const std::function<const std::vector<double>&(
                            const PowerDrawRecord&)>& get) {
    std::vector<std::vector<double>> per_point(static_cast<size_t>(n_p));
    for (int k = 0; k < n_p; ++k)
      for (const auto& rec : records)
        per_point[static_cast<size_t>(k)].push_back(
            get(rec)[static_cast<size_t>(k)]);
    return per_point;
  };

  if (do_fwd) {
    auto pp = gather_one([](const PowerDrawRecord& r) -> const std::vector<double>& {
      return r.rho_star_fwd;
    });
    detail::push_mean_se(res, "rho_star_fwd", pp);
    pp = gather_one([](const PowerDrawRecord& r) -> const std::vector<double>& {
      return r.with_si_fwd;
    });
    detail::push_mean_se(res, "frac_with_si_fwd", pp);
    auto pq = gather_pair(
        [](const PowerDrawRecord& r)
            -> const std::vector<std::array<double, 2>>& {
          return r.eta_r_star_fwd_sig;
        });
    detail::push_mean_se(res, "eta_r_star_fwd_signaling", pq);
    pq = gather_pair(
        [](const PowerDrawRecord& r)
            -> const std::vector<std::array<double, 2>>& {
          return r.eta_e_star_fwd;
        });
    detail::push_mean_se(res, "eta_e_star_fwd", pq);
    pp = gather_one([](const PowerDrawRecord& r) -> const std::vector<double>& {
      return r.eta_e_star_fwd_approx;
    });
    detail::push_mean_se(res, "eta_e_star_fwd_approx", pp);
    pq = gather_pair(
        [](const PowerDrawRecord& r)
            -> const std::vector<std::array<double, 2>>& {
          return r.cross_fwd_sig;
        });
    detail::push_mean_se(res, "crossover_fwd_signaling", pq);
  }
  if (do_bwd) {
    auto pp = gather_one([](const PowerDrawRecord& r) -> const std::vector<double>& {
      return r.rho_star_bwd;
    });
    detail::push_mean_se(res, "rho_star_bwd", pp);
    pp = gather_one([](const PowerDrawRecord& r) -> const std::vector<double>& {
      return r.with_si_bwd;
    });
    detail::push_mean_se(res, "frac_with_si_bwd", pp);
    auto pq = gather_pair(
        [](const PowerDrawRecord& r)
            -> const std::vector<std::array<double, 2>>& {
          return r.eta_r_star_bwd_ofdm;
        });
    detail::push_mean_se(res, "eta_r_star_bwd_ofdm", pq);
    pq = gather_pair(
        [](const PowerDrawRecord& r)
            -> const std::vector<std::array<double, 2>>& {
          return r.eta_r_star_bwd_sig;
        });
    detail::push_mean_se(res, "eta_r_star_bwd_signaling", pq);
    pq = gather_pair(
        [](const PowerDrawRecord& r)
            -> const std::vector<std::array<double, 2>>& {
          return r.eta_e_star_bwd;
        });
    detail::push_mean_se(res, "eta_e_star_bwd", pq);
    pp = gather_one([](const PowerDrawRecord& r) -> const std::vector<double>& {
      return r.eta_e_star_bwd_approx;
    });
    detail::push_mean_se(res, "eta_e_star_bwd_approx", pp);
    pq = gather_pair(
        [](const PowerDrawRecord& r)
            -> const std::vector<std::array<double, 2>>& {
          return r.cross_bwd_ofdm;
        });
    detail::push_mean_se(res, "crossover_bwd_ofdm", pq);
    pq = gather_pair(
        [](const PowerDrawRecord& r)
            -> const std::vector<std::array<double, 2>>& {
          return r.cross_bwd_sig;
        });
    detail::push_mean_se(res, "crossover_bwd_signaling", pq);
  }
  return res;
}

// --- emission ---------------------------------------------------------

namespace detail {

inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

}  // namespace detail

// CSV: comment header with run metadata, then one row per axis point. All
// numbers carry 17 significant digits so doubles round-trip exactly.
inline void emit_csv(const SweepResult& res, std::ostream& out) {
  out << "# fdsim sweep schema=1\n";
  out << "# kind=" << res.kind << " seed=" << res.seed
      << " realizations=" << res.n_realizations
      << " resamples=" << res.total_resamples
      << " flagged=" << (res.flagged ? 1 : 0) << "\n";
  out << "# columns: " << res.axis_name;
  for (const auto& c : res.columns) out << "," << c.first;
  out << "\n";
  out << res.axis_name;
  for (const auto& c : res.columns) out << "," << c.first;
  out << "\n";
  for (size_t k = 0; k < res.axis.size(); ++k) {
    out << detail::format_g17(res.axis[k]);
    for (const auto& c : res.columns)
      out << "," << detail::format_g17(c.second[k]);
    out << "\n";
  }
}

inline nlohmann::json sweep_to_json(const SweepResult& res) {
  nlohmann::json cols = nlohmann::json::object();
  for (const auto& c : res.columns) cols[c.first] = c.second;
  return nlohmann::json{{"schema", "fdsim.sweep/1"},
                        {"kind", res.kind},
                        {"axis_name", res.axis_name},
                        {"axis", res.axis},
                        {"columns", cols},
                        {"config", res.config_echo},
                        {"seed", res.seed},
                        {"n_realizations", res.n_realizations},
                        {"total_resamples", res.total_resamples},
                        {"flagged", res.flagged},
                        {"version", FDSIM_VERSION}};
}

inline void emit_json(const SweepResult& res, std::ostream& out) {
  out << sweep_to_json(res).dump(2) << "\n";
}

inline void emit_to_file(const SweepResult& res, const std::string& path,
                         const std::string& format) {
  std::ostringstream body;
  if (format == "csv")
    emit_csv(res, body);
  else if (format == "json")
    emit_json(res, body);
  else
    throw ConfigError("unknown output format: " + format);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open output file for writing: " + path);
  out << body.str();
  if (!out) throw IoError("failed while writing output file: " + path);
}

}  // namespace fdsim
