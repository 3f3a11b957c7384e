#include <catch2/catch_amalgamated.hpp>

#include "fdsim/channel.hpp"
#include "fdsim/precoding.hpp"
#include "fdsim/rx_whitening.hpp"

using namespace fdsim;

namespace {

constexpr double kPth = 0.1;     // 20 dBm
constexpr double kPsat = 0.631;  // ~28 dBm
constexpr double kN0 = 3.162e-13;

struct Scene {
  OfdmGrid grid = OfdmGrid::contiguous_halves(64, 16);
  OfdmOps ops = OfdmOps::build(grid);
  ConvolutionPair hs, hm;
  Precoder g1, g2, b1, b2;
  Vec ht11;
  Mat p1, p2;  // diagonal subcarrier powers

  explicit Scene(std::uint64_t seed) {
    Rng rng(seed);
    const PowerDelayProfile pdp = exp_pdp(grid.cp_len, 2.5);
    const ChannelTaps t11 = sample_taps(pdp, rng);
    const ConvolutionPair h11 =
        convolution_matrices(t11, grid.block_len());
    const ConvolutionPair h12 =
        convolution_matrices(sample_taps(pdp, rng), grid.block_len());
    const ConvolutionPair h21 =
        convolution_matrices(sample_taps(pdp, rng), grid.block_len());
    const ConvolutionPair h22 =
        convolution_matrices(sample_taps(pdp, rng), grid.block_len());
    hs = convolution_matrices(sample_taps(pdp, rng), grid.block_len());
    hm = convolution_matrices(sample_taps(pdp, rng), grid.block_len());
    ht11 = freq_response(t11, grid);
    g1 = forward_nullspace(h11, h12, ops, 1);
    g2 = forward_nullspace(h22, h21, ops, 2);
    b1 = backward_nullspace(hs, ops, 1);
    b2 = backward_nullspace(hs, ops, 2);
    p1 = Mat::Zero(64, 64);
    p2 = Mat::Zero(64, 64);
    for (int k : grid.set_1) p1(k, k) = 2.0 * rng.uniform_oc();
    for (int k : grid.set_2) p2(k, k) = 2.0 * rng.uniform_oc();
  }
};

double whiten_dev(const WhiteningDecomposition& w) {
  return (w.inv_sqrt * w.cov * w.inv_sqrt.adjoint() -
          Mat::Identity(w.cov.rows(), w.cov.cols()))
      .cwiseAbs()
      .maxCoeff();
}

}  // namespace

TEST_CASE("residual interference regimes") {
  const double p = 0.25;  // ~24 dBm
  SECTION("boundary belongs to the clean regime") {
    const ResidualSiModel m = residual_si(kPth / p, p, kPth, kPsat, kN0);
    CHECK(m.regime == SiRegime::NoResidualSI);
    CHECK(m.alpha_eq == 0.0);
  }
  SECTION("just above the boundary a noise-level residual remains") {
    const ResidualSiModel m =
        residual_si(kPth / p + 1e-12, p, kPth, kPsat, kN0);
    CHECK(m.regime == SiRegime::ResidualSI);
    CHECK(m.alpha_eq == Catch::Approx(kN0 / kPth).epsilon(1e-12));
  }
  SECTION("past the saturation point decoding stops") {
    const ResidualSiModel m = residual_si(0.9, 1.0, kPth, kPsat, kN0);
    CHECK(m.regime == SiRegime::Saturated);
    CHECK(std::isnan(m.alpha_eq));
  }
  SECTION("low power never leaves the clean regime") {
    for (double rho : {0.0, 0.3, 0.7, 1.0}) {
      const ResidualSiModel m = residual_si(rho, 0.05, kPth, kPsat, kN0);
      CHECK(m.regime == SiRegime::NoResidualSI);
    }
  }
}

TEST_CASE("hermitian inverse square root") {
  Rng rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    const int m = 24;
    Mat g(m, m);
    for (int c = 0; c < m; ++c)
      for (int r = 0; r < m; ++r) g(r, c) = rng.cgauss(1.0);
    const Mat cov = g * g.adjoint() + 0.01 * Mat::Identity(m, m);
    const Mat w = inv_sqrt(cov);
    CHECK((w * cov * w.adjoint() - Mat::Identity(m, m)).cwiseAbs().maxCoeff() <
          1e-10);
    // the root is Hermitian itself
    CHECK((w - w.adjoint()).cwiseAbs().maxCoeff() < 1e-10);
  }
  Mat bad = Mat::Identity(4, 4);
  bad(2, 2) = Complex(-0.5, 0.0);
  CHECK_THROWS_AS(inv_sqrt(bad), NotPositiveDefinite);
}

TEST_CASE("transmit block covariance carries the prefix replica energy") {
  const OfdmGrid grid = OfdmGrid::contiguous_halves(64, 16);
  const OfdmOps ops = OfdmOps::build(grid);
  Rng rng(77);
  Mat p = Mat::Zero(64, 64);
  double tr = 0.0;
  for (int k = 0; k < 64; ++k) {
    p(k, k) = rng.uniform_oc();
    tr += p(k, k).real();
  }
  const Mat s = ofdm_tx_block_cov(ops, p);
  REQUIRE(s.rows() == 80);
  CHECK(s.trace().real() == Catch::Approx(tr * 80.0 / 64.0).epsilon(1e-12));
  CHECK((s - s.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("whitening identity holds for all four assemblies") {
  Scene sc(9001);
  const double p = 0.25, p_b = 0.125, p_bwd = 0.1259, p_fwd = 0.25;
  const double rho_ns = 0.3, rho_si = 0.7;

  const WhiteningDecomposition w1 = forward_signaling_cov_no_si(
      sc.hs, sc.p1, sc.g1.gamma, rho_ns, 2e-6, kN0, sc.ops);
  CHECK(whiten_dev(w1) < 1e-8);
  CHECK(w1.diag_gains.size() == sc.g1.streams);
  // singular values arrive sorted
  for (int k = 0; k + 1 < w1.diag_gains.size(); ++k)
    CHECK(w1.diag_gains(k) >= w1.diag_gains(k + 1));

  const WhiteningDecomposition w2 = forward_signaling_cov_with_si(
      sc.hs, sc.p1, sc.p2, sc.g1.gamma, sc.g2.gamma, rho_si, 2e-6, kN0, kPth,
      p_b, sc.ops);
  CHECK(whiten_dev(w2) < 1e-8);

  const WhiteningDecomposition w3 = backward_ofdm_cov_with_si(
      sc.b1.gamma, sc.ht11, rho_si, kN0, kPth, p_bwd, sc.ops, 1);
  CHECK(whiten_dev(w3) < 1e-8);
  REQUIRE(w3.cov.rows() == sc.ops.set_size(1));

  const WhiteningDecomposition w4 = backward_signaling_cov(
      sc.hm, sc.hs, sc.p1, sc.b1.gamma, sc.b2.gamma, rho_si, 2e-6, kN0,
      SiRegime::ResidualSI, kPth, p_bwd, sc.ops);
  CHECK(whiten_dev(w4) < 1e-8);
  CHECK(w4.diag_gains.size() == sc.b1.gamma.cols());

  (void)p;
  (void)p_fwd;
}

TEST_CASE("noise-only covariance whitens to a pure scaling") {
  Scene sc(9002);
  // at rho = 0 nothing reaches the receive chain but thermal noise
  const WhiteningDecomposition w = forward_signaling_cov_no_si(
      sc.hs, sc.p1, sc.g1.gamma, 0.0, 2e-6, kN0, sc.ops);
  CHECK((w.cov - kN0 * Mat::Identity(80, 80)).cwiseAbs().maxCoeff() <
        1e-12 * kN0);
  // whitened effective channel equals hs.lower * gamma / sqrt(N0)
  const Mat eff = sc.hs.lower * sc.g1.gamma;
  Eigen::BDCSVD<Mat> svd(eff);
  const RealVec sv = svd.singularValues() / std::sqrt(kN0);
  for (int k = 0; k < w.diag_gains.size(); ++k)
    CHECK(w.diag_gains(k) == Catch::Approx(sv(k)).epsilon(1e-9));
}

TEST_CASE("interference only inflates the covariance") {
  Scene sc(9003);
  const double rho = 0.7, p_b = 0.125, p_bwd = 0.1;
  const WhiteningDecomposition base = forward_signaling_cov_no_si(
      sc.hs, sc.p1, sc.g1.gamma, rho, 2e-6, kN0, sc.ops);
  const WhiteningDecomposition si = forward_signaling_cov_with_si(
      sc.hs, sc.p1, sc.p2, sc.g1.gamma, sc.g2.gamma, rho, 2e-6, kN0, kPth,
      p_b, sc.ops);
  const Mat diff = si.cov - base.cov;
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (diff + diff.adjoint()));
  CHECK(es.eigenvalues().minCoeff() > -1e-14 * si.cov.cwiseAbs().maxCoeff());
  (void)p_bwd;
}

TEST_CASE("saturated regime refuses to build a decoder") {
  Scene sc(9004);
  CHECK_THROWS_AS(
      backward_signaling_cov(sc.hm, sc.hs, sc.p1, sc.b1.gamma, sc.b2.gamma,
                             0.9, 2e-6, kN0, SiRegime::Saturated, kPth, 1.0,
                             sc.ops),
      SaturatedRegime);
}
