#include <catch2/catch_amalgamated.hpp>

#include "fdsim/channel.hpp"

using namespace fdsim;

TEST_CASE("exponential power delay profile") {
  const PowerDelayProfile pdp = exp_pdp(16, 2.5);
  REQUIRE(pdp.variances.size() == 17);
  CHECK(pdp.variances.sum() == Catch::Approx(1.0).margin(1e-15));
  for (int n = 0; n + 1 < 17; ++n)
    CHECK(pdp.variances(n + 1) / pdp.variances(n) ==
          Catch::Approx(std::exp(-2.5)).margin(1e-12));
  CHECK_THROWS_AS(exp_pdp(4, 0.0), ConfigError);
  CHECK_THROWS_AS(exp_pdp(-1, 1.0), ConfigError);
}

TEST_CASE("sampled taps follow the profile variances") {
  const PowerDelayProfile pdp = exp_pdp(3, 1.0);
  Rng rng(314);
  RealVec acc = RealVec::Zero(4);
  const int m = 150000;
  for (int k = 0; k < m; ++k) {
    const ChannelTaps t = sample_taps(pdp, rng);
    for (int n = 0; n < 4; ++n) acc(n) += std::norm(t.taps(n));
  }
  for (int n = 0; n < 4; ++n)
    CHECK(acc(n) / m == Catch::Approx(pdp.variances(n)).epsilon(0.03));
}

TEST_CASE("convolution matrices split a circulant") {
  Rng rng(2718);
  const PowerDelayProfile pdp = exp_pdp(4, 1.5);
  const ChannelTaps taps = sample_taps(pdp, rng);
  const int block = 12;
  const ConvolutionPair cp = convolution_matrices(taps, block);
  REQUIRE(cp.full.rows() == block);
  CHECK((cp.full - cp.lower - cp.upper).cwiseAbs().maxCoeff() == 0.0);
  // full is the circulant built from the zero-padded tap vector
  Vec padded = Vec::Zero(block);
  padded.head(5) = taps.taps;
  for (int m = 0; m < block; ++m)
    for (int n = 0; n < block; ++n)
      CHECK(cp.full(m, n) == padded((m - n + block) % block));
  // wrap-around part lives only in the top-right l x l corner
  for (int m = 0; m < block; ++m)
    for (int n = 0; n < block; ++n)
      if (m >= 4 || n < block - 4) CHECK(cp.upper(m, n) == Complex(0.0, 0.0));
  // y = full * x is the circular convolution of x with the taps
  Vec x(block);
  for (int k = 0; k < block; ++k) x(k) = rng.cgauss(1.0);
  const Vec y = cp.full * x;
  for (int m = 0; m < block; ++m) {
    Complex want(0.0, 0.0);
    for (int k = 0; k < 5; ++k) want += taps.taps(k) * x((m - k + block) % block);
    CHECK(std::abs(y(m) - want) < 1e-13);
  }
}

TEST_CASE("frequency response matches the direct transform") {
  Rng rng(99);
  const OfdmGrid grid = OfdmGrid::contiguous_halves(16, 4);
  const PowerDelayProfile pdp = exp_pdp(4, 2.0);
  const ChannelTaps taps = sample_taps(pdp, rng);
  const Vec ht = freq_response(taps, grid);
  REQUIRE(ht.size() == 16);
  for (int k = 0; k < 16; ++k) {
    Complex want(0.0, 0.0);
    for (int n = 0; n < 5; ++n)
      want += taps.taps(n) *
              std::polar(1.0, -2.0 * kPi * static_cast<double>(n * k) / 16.0);
    CHECK(std::abs(ht(k) - want) < 1e-13);
  }
}

TEST_CASE("one ofdm pass diagonalizes the causal channel part") {
  Rng rng(1234);
  const OfdmGrid grid = OfdmGrid::contiguous_halves(64, 16);
  const OfdmOps ops = OfdmOps::build(grid);
  const PowerDelayProfile pdp = exp_pdp(16, 2.5);
  for (int trial = 0; trial < 5; ++trial) {
    const ChannelTaps taps = sample_taps(pdp, rng);
    const ConvolutionPair cp = convolution_matrices(taps, grid.block_len());
    const Vec ht = freq_response(taps, grid);
    const Mat eff = ops.F * ops.B * cp.lower * ops.A * ops.Finv;
    const Mat want = Vec(ht).asDiagonal();
    CHECK((eff - want).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("indoor path loss frozen values") {
  // 1800 MHz: 20 log10(1800) = 65.105450102066117 dB
  const double pl10 = linear_to_db(indoor_path_loss(1.8e9, 10.0));
  CHECK(pl10 == Catch::Approx(-57.105450102066117).margin(1e-10));
  const double pl15 = linear_to_db(indoor_path_loss(1.8e9, 15.0));
  CHECK(pl15 == Catch::Approx(-60.627275283179738).margin(1e-10));
  const double pl20 = linear_to_db(indoor_path_loss(1.8e9, 20.0));
  CHECK(pl20 == Catch::Approx(-63.126050015345742).margin(1e-10));
  CHECK_THROWS_AS(indoor_path_loss(1.8e9, 0.5), ConfigError);
}

TEST_CASE("power unit conversions") {
  CHECK(dbm_to_linear(30.0) == Catch::Approx(1.0).margin(1e-15));
  CHECK(dbm_to_linear(0.0) == Catch::Approx(1e-3).margin(1e-18));
  CHECK(db_to_linear(-10.0) == Catch::Approx(0.1).margin(1e-15));
  CHECK(linear_to_dbm(1.0) == Catch::Approx(30.0).margin(1e-12));
}

TEST_CASE("link budget validation") {
  LinkBudget lb;
  lb.alpha_11 = lb.alpha_12 = lb.alpha_21 = lb.alpha_22 = 1e-6;
  lb.alpha_b = 2e-6;
  lb.alpha_c = 0.1;
  lb.alpha_m = 3e-4;
  CHECK_NOTHROW(lb.validate());
  lb.alpha_c = 1.5;
  CHECK_THROWS_AS(lb.validate(), ConfigError);
  lb.alpha_c = 0.0;
  CHECK_THROWS_AS(lb.validate(), ConfigError);
}
