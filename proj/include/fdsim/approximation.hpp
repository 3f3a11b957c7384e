#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <utility>

#include "fdsim/common.hpp"
#include "fdsim/rx_whitening.hpp"

namespace fdsim {

// Two-point fit of a rate-vs-rho curve by g(rho) = log2(1 + c rho^phi),
// exact at both anchors. The no-SI segment anchors at {P_th/P, P_th/(2P)};
// the residual-SI segment at {(P_th + eps)/P, min(1, P_sat/P)} with a small
// eps standing in for the one-sided limit at the regime edge.
struct RateFit {
  double c = 0.0;
  double phi = 0.0;
  SiRegime regime = SiRegime::NoResidualSI;
  std::array<std::pair<double, double>, 2> anchors{};  // (rho, rate)
  double epsilon = 0.0;
};

inline double fit_eval(const RateFit& fit, double rho) {
  return std::log2(1.0 + fit.c * std::pow(rho, fit.phi));
}

inline RateFit fit_rate_curve(const std::function<double(double)>& r_fn,
                              SiRegime regime, double p, double p_th,
                              double p_sat,
                              double epsilon_scale = 1e-3) {
  if (!(p > 0.0) || !(p_th > 0.0) || !(p_sat > 0.0))
    throw ConfigError("fit_rate_curve: powers must be positive");
  RateFit fit;
  fit.regime = regime;
  double rho_a = 0.0, rho_b = 0.0;
  if (regime == SiRegime::NoResidualSI) {
    rho_a = std::min(1.0, p_th / p);
    rho_b = std::min(1.0, p_th / (2.0 * p));
    fit.epsilon = 0.0;
  } else if (regime == SiRegime::ResidualSI) {
    fit.epsilon = epsilon_scale * p_th;
    rho_a = (p_th + fit.epsilon) / p;
    rho_b = std::min(1.0, p_sat / p);
    if (!(rho_a < rho_b))
      throw OutOfScopeRegime(
          "fit_rate_curve: residual-SI segment is empty at this power");
  } else {
    throw OutOfScopeRegime("fit_rate_curve: no rate curve when saturated");
  }
  const double r_a = r_fn(rho_a);
  const double r_b = r_fn(rho_b);
  if (!(r_a > 0.0) || !(r_b > 0.0) || r_a == r_b)
    throw DegenerateAnchors("fit_rate_curve: anchor rates equal or zero");
  const double num = std::exp2(r_a) - 1.0;
  const double den = std::exp2(r_b) - 1.0;
  fit.phi = std::log(num / den) / std::log(rho_a / rho_b);
  fit.c = num / std::pow(rho_a, fit.phi);
  fit.anchors = {std::make_pair(rho_a, r_a), std::make_pair(rho_b, r_b)};
  return fit;
}

// Range of splitting ratios over which the fitted no-SI rate beats the
// rho = 1 baseline: [((2^baseline - 1)/c)^(1/phi), P_th/P]. Meaningful only
// for P_th < P <= P_sat.
struct CrossoverInterval {
  double lower = 0.0;
  double upper = 0.0;
  bool valid = false;
};

inline CrossoverInterval crossover_interval(const RateFit& fit,
                                            double baseline_rate, double p,
                                            double p_th, double p_sat) {
  if (!(p > p_th) || !(p <= p_sat))
    throw OutOfScopeRegime(
        "crossover_interval: requires P_th < P <= P_sat");
  CrossoverInterval ci;
  ci.upper = p_th / p;
  ci.lower = std::pow((std::exp2(baseline_rate) - 1.0) / fit.c, 1.0 / fit.phi);
  ci.valid = ci.lower >= 0.0 && ci.lower <= ci.upper;
  return ci;
}

// Rate-optimal splitting ratio: the regime edge. P_th/P when restricted to
// perfect cancellation, min(1, P_sat/P) when residual SI is admitted.
inline double optimal_rho(double p, double p_th, double p_sat,
                          SiRegime regime_choice) {
  if (!(p > 0.0) || !(p_th > 0.0) || !(p_sat > 0.0))
    throw ConfigError("optimal_rho: powers must be positive");
  if (regime_choice == SiRegime::NoResidualSI) return std::min(1.0, p_th / p);
  if (regime_choice == SiRegime::ResidualSI)
    return std::min(1.0, p_sat / p);
  throw OutOfScopeRegime("optimal_rho: saturated regime has no optimum");
}

}  // namespace fdsim
