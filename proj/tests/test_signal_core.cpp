#include <catch2/catch_amalgamated.hpp>

#include "fdsim/rng.hpp"
#include "fdsim/signal_core.hpp"

using namespace fdsim;

TEST_CASE("dft matrix entries and unitarity") {
  const Mat f4 = dft_matrix(4);
  // (1,1) entry of the normalized 4-point DFT is exp(-j*pi/2)/2 = -j/2
  CHECK(std::abs(f4(1, 1) - Complex(0.0, -0.5)) < 1e-15);
  CHECK(std::abs(f4(0, 0) - Complex(0.5, 0.0)) < 1e-15);
  CHECK(std::abs(f4(2, 2) - Complex(0.5, 0.0)) < 1e-15);  // exp(-j*2pi) / 2
  for (int k = 0; k < 4; ++k) {
    CHECK(std::abs(f4(0, k) - Complex(0.5, 0.0)) < 1e-15);
    CHECK(std::abs(f4(k, 0) - Complex(0.5, 0.0)) < 1e-15);
  }
  const Mat f = dft_matrix(64);
  const double dev =
      (f * f.adjoint() - Mat::Identity(64, 64)).cwiseAbs().maxCoeff();
  CHECK(dev < 1e-13);
}

TEST_CASE("cyclic prefix matrices") {
  const int n = 8, l = 3;
  const OfdmGrid grid = OfdmGrid::contiguous_halves(n, l);
  const Mat a = cp_insertion(grid);
  const Mat b = cp_removal(grid);
  REQUIRE(a.rows() == n + l);
  REQUIRE(a.cols() == n);
  REQUIRE(b.rows() == n);
  REQUIRE(b.cols() == n + l);
  // removal undoes insertion
  CHECK(((b * a) - Mat::Identity(n, n)).cwiseAbs().maxCoeff() == 0.0);
  // inserted block replicates the data tail
  Rng rng(11);
  Vec u(n);
  for (int k = 0; k < n; ++k) u(k) = rng.cgauss(1.0);
  const Vec x = a * u;
  CHECK((x.head(l) - u.tail(l)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((x.tail(n) - u).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("grid validation rejects malformed partitions") {
  OfdmGrid g;
  g.n_subcarriers = 8;
  g.cp_len = 2;
  g.set_1 = {0, 1, 2, 3};
  g.set_2 = {3, 4, 5, 6};  // overlap
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g.set_2 = {4, 5, 6};  // does not cover
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g.set_2 = {4, 5, 6, 8};  // out of range
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g.set_2 = {4, 5, 6, 7};
  CHECK_NOTHROW(g.validate());
  g.cp_len = 8;  // cp must be shorter than the block
  CHECK_THROWS_AS(g.validate(), ConfigError);
}

TEST_CASE("contiguous halves partition") {
  const OfdmGrid g = OfdmGrid::contiguous_halves(64, 16);
  REQUIRE(g.set_1.size() == 32);
  REQUIRE(g.set_2.size() == 32);
  CHECK(g.set_1.front() == 0);
  CHECK(g.set_1.back() == 31);
  CHECK(g.set_2.front() == 32);
  CHECK(g.set_2.back() == 63);
  CHECK(g.block_len() == 80);
}

TEST_CASE("selector identities") {
  const OfdmGrid g = OfdmGrid::contiguous_halves(16, 4);
  const OfdmOps ops = OfdmOps::build(g);
  const int n = g.n_subcarriers;
  CHECK(((ops.D1 + ops.D2) - Mat::Identity(n, n)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ops.D1 * ops.D2).cwiseAbs().maxCoeff() == 0.0);
  for (int which = 1; which <= 2; ++which) {
    const Mat& dt = which == 1 ? ops.Dt1 : ops.Dt2;
    const Mat& d = which == 1 ? ops.D1 : ops.D2;
    const int m = ops.set_size(which);
    CHECK((dt * dt.adjoint() - Mat::Identity(m, m)).cwiseAbs().maxCoeff() ==
          0.0);
    CHECK((dt.adjoint() * dt - d).cwiseAbs().maxCoeff() == 0.0);
  }
  // rows follow the sorted carrier order
  const auto& set = g.set_1;
  for (size_t r = 0; r < set.size(); ++r)
    CHECK(ops.Dt1(static_cast<int>(r), set[r]) == Complex(1.0, 0.0));
}

TEST_CASE("ofdm modulation maps data through the configured carriers") {
  const OfdmGrid g = OfdmGrid::contiguous_halves(16, 4);
  const OfdmOps ops = OfdmOps::build(g);
  Rng rng(5);
  Vec u = Vec::Zero(16);
  for (int k : g.set_1) u(k) = rng.cgauss(1.0);
  const Vec x = ofdm_modulate(u, g, 1);
  REQUIRE(x.size() == g.block_len());
  const Vec want = ops.A * (ops.Finv * (ops.D1 * u));
  CHECK((x - want).cwiseAbs().maxCoeff() < 1e-14);
  // prefix equals the block tail
  CHECK((x.head(4) - x.tail(16).tail(4)).cwiseAbs().maxCoeff() < 1e-14);
  // energy off the node's carriers is rejected
  Vec bad = u;
  bad(g.set_2[0]) = Complex(1.0, 0.0);
  CHECK_THROWS_AS(ofdm_modulate(bad, g, 1), ConfigError);
}

TEST_CASE("rng stream splitting is deterministic and order sensitive") {
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
  CHECK(mix_seed(1, 2) == mix_seed(1, 2));
  CHECK(mix_seed(1, 2, 3) != mix_seed(1, 3, 2));
  Rng a(42), b(42);
  for (int k = 0; k < 100; ++k) CHECK(a.gauss() == b.gauss());
  // uniform_oc stays within (0, 1]
  Rng c(7);
  for (int k = 0; k < 1000; ++k) {
    const double v = c.uniform_oc();
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("complex gaussian variance") {
  Rng rng(100);
  double acc = 0.0;
  const int m = 200000;
  for (int k = 0; k < m; ++k) acc += std::norm(rng.cgauss(2.0));
  CHECK(acc / m == Catch::Approx(2.0).epsilon(0.02));
}
