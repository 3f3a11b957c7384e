#include <catch2/catch_amalgamated.hpp>

#include "fdsim/channel.hpp"
#include "fdsim/energy.hpp"

using namespace fdsim;

namespace {

struct EnergyScene {
  int nl = 80;
  ConvolutionPair hs, hm, h_own, h_peer;
  Mat x_own, x_peer;

  explicit EnergyScene(std::uint64_t seed, double p) {
    Rng rng(seed);
    const PowerDelayProfile pdp = exp_pdp(16, 2.5);
    hs = convolution_matrices(sample_taps(pdp, rng), nl);
    hm = convolution_matrices(sample_taps(pdp, rng), nl);
    h_own = convolution_matrices(sample_taps(pdp, rng), nl);
    h_peer = convolution_matrices(sample_taps(pdp, rng), nl);
    x_own = psd(rng, p);
    x_peer = psd(rng, p);
  }

  Mat psd(Rng& rng, double p) {
    Mat g(nl, nl);
    for (int c = 0; c < nl; ++c)
      for (int r = 0; r < nl; ++r) g(r, c) = rng.cgauss(1.0);
    Mat m = g * g.adjoint();
    m *= (static_cast<double>(nl) * p) / m.trace().real();
    return m;
  }
};

}  // namespace

TEST_CASE("leakage-only energy collapses to the closed form") {
  const double p = 0.25, beta = 0.7, alpha_c = 0.1;
  EnergyScene sc(42, p);
  const Mat silent = Mat::Zero(sc.nl, sc.nl);
  for (double rho : {0.0, 0.25, 0.5, 0.9, 1.0}) {
    const EnergyReport r = energy_forward(sc.hs, sc.hm, sc.x_own, silent, rho,
                                          beta, 0.0, alpha_c, 0.0, p);
    const double want = beta * alpha_c * (1.0 - rho) * p;
    CHECK(std::abs(r.exact - want) <= 1e-10 * std::max(want, p));
    CHECK(r.approx == Catch::Approx(want).margin(1e-18));
    CHECK(r.e_tx == p);
    CHECK(r.beta == beta);
  }
}

TEST_CASE("recycled energy scales linearly in the harvested fraction") {
  const double p = 0.25, beta = 0.7;
  EnergyScene sc(43, p);
  const EnergyReport a = energy_forward(sc.hs, sc.hm, sc.x_own, sc.x_peer,
                                        0.2, beta, 2e-6, 0.1, 3e-4, p);
  const EnergyReport b = energy_forward(sc.hs, sc.hm, sc.x_own, sc.x_peer,
                                        0.6, beta, 2e-6, 0.1, 3e-4, p);
  CHECK(a.exact / b.exact == Catch::Approx(0.8 / 0.4).epsilon(1e-12));
  CHECK(a.eta_e == Catch::Approx(a.exact / p).margin(1e-18));
}

TEST_CASE("harvested energy is nonnegative and beta-bounded in practice") {
  const double p = 0.25, beta = 0.7, alpha_c = 0.1, alpha_m = 3.16e-4;
  for (std::uint64_t seed = 50; seed < 60; ++seed) {
    EnergyScene sc(seed, p);
    const EnergyReport r = energy_forward(sc.hs, sc.hm, sc.x_own, sc.x_peer,
                                          0.3, beta, 2e-6, alpha_c, alpha_m, p);
    CHECK(r.exact >= 0.0);
    // leakage dominates multipath by 25 dB, so eta stays near the
    // approximation and well under beta * alpha_c * (1 + margin)
    CHECK(r.eta_e < beta * alpha_c);
    CHECK(r.eta_e > 0.0);
  }
}

TEST_CASE("backward energy with silent uplinks matches the forward trace") {
  const double p = 0.1259, beta = 0.7, alpha_c = 0.1, alpha_m = 3.16e-4;
  EnergyScene sc(61, p);
  const Mat silent = Mat::Zero(sc.nl, sc.nl);
  const EnergyReport fwd = energy_forward(sc.hs, sc.hm, sc.x_own, sc.x_peer,
                                          0.4, beta, 2e-6, alpha_c, alpha_m, p);
  const EnergyReport bwd = energy_backward(
      sc.h_own, sc.h_peer, sc.hs, sc.hm, silent, silent, sc.x_own, sc.x_peer,
      0.4, beta, 1e-6, 1e-6, 2e-6, alpha_c, alpha_m, p);
  CHECK(bwd.exact == Catch::Approx(fwd.exact).epsilon(1e-12));
}

TEST_CASE("uplink arrivals add energy") {
  const double p = 0.1259, beta = 0.7;
  EnergyScene sc(62, p);
  const Mat silent = Mat::Zero(sc.nl, sc.nl);
  Rng rng(63);
  const Mat s_own = sc.psd(rng, p);
  const Mat s_peer = sc.psd(rng, p);
  const EnergyReport without = energy_backward(
      sc.h_own, sc.h_peer, sc.hs, sc.hm, silent, silent, sc.x_own, sc.x_peer,
      0.4, beta, 1e-6, 1e-6, 2e-6, 0.1, 3e-4, p);
  const EnergyReport with_an = energy_backward(
      sc.h_own, sc.h_peer, sc.hs, sc.hm, s_own, s_peer, sc.x_own, sc.x_peer,
      0.4, beta, 1e-6, 1e-6, 2e-6, 0.1, 3e-4, p);
  CHECK(with_an.exact > without.exact);
}

TEST_CASE("mismatched covariance dimensions are rejected") {
  const double p = 0.25;
  EnergyScene sc(64, p);
  const Mat wrong = Mat::Zero(40, 40);
  CHECK_THROWS_AS(energy_forward(sc.hs, sc.hm, wrong, sc.x_peer, 0.3, 0.7,
                                 2e-6, 0.1, 3e-4, p),
                  DimensionMismatch);
}
