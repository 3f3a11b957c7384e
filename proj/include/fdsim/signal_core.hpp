#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fdsim/common.hpp"

namespace fdsim {

// OFDMA grid: N subcarriers, cyclic prefix of L samples, and a partition of
// the carriers between the two server nodes. Carrier indices are 0-based.
struct OfdmGrid {
  int n_subcarriers = 0;
  int cp_len = 0;
  std::vector<int> set_1;
  std::vector<int> set_2;

  int block_len() const { return n_subcarriers + cp_len; }

  const std::vector<int>& set_of(int which) const {
    if (which == 1) return set_1;
    if (which == 2) return set_2;
    throw ConfigError("set_of: node index must be 1 or 2");
  }
  const std::vector<int>& peer_set_of(int which) const {
    return set_of(which == 1 ? 2 : 1);
  }

  void validate() const {
    if (n_subcarriers <= 0) throw ConfigError("n_subcarriers must be positive");
    if (cp_len <= 0 || cp_len >= n_subcarriers)
      throw ConfigError("cp_len must lie in (0, n_subcarriers)");
    std::vector<char> seen(static_cast<size_t>(n_subcarriers), 0);
    auto mark = [&](const std::vector<int>& s) {
      for (int k : s) {
        if (k < 0 || k >= n_subcarriers)
          throw ConfigError("subcarrier index out of range");
        if (seen[static_cast<size_t>(k)])
          throw ConfigError("subcarrier sets must be disjoint");
        seen[static_cast<size_t>(k)] = 1;
      }
    };
    mark(set_1);
    mark(set_2);
    for (char c : seen)
      if (!c) throw ConfigError("subcarrier sets must cover every carrier");
  }

  static OfdmGrid contiguous_halves(int n, int l) {
    OfdmGrid g;
    g.n_subcarriers = n;
    g.cp_len = l;
    g.set_1.resize(static_cast<size_t>(n / 2));
    g.set_2.resize(static_cast<size_t>(n - n / 2));
    std::iota(g.set_1.begin(), g.set_1.end(), 0);
    std::iota(g.set_2.begin(), g.set_2.end(), n / 2);
    g.validate();
    return g;
  }
};

// Normalized n-point DFT: entry (m,k) = exp(-j 2 pi m k / n) / sqrt(n).
inline Mat dft_matrix(int n) {
  if (n < 1) throw ConfigError("dft_matrix: n must be >= 1");
  Mat f(n, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (int m = 0; m < n; ++m)
    for (int k = 0; k < n; ++k)
      f(m, k) = std::polar(scale, -2.0 * kPi * static_cast<double>(m) *
                                      static_cast<double>(k) /
                                      static_cast<double>(n));
  return f;
}

// (N+L) x N cyclic-prefix insertion: copies the last L samples on top of the
// data block.
inline Mat cp_insertion(const OfdmGrid& grid) {
  grid.validate();
  const int n = grid.n_subcarriers;
  const int l = grid.cp_len;
  Mat a = Mat::Zero(n + l, n);
  a.block(0, n - l, l, l).setIdentity();
  a.block(l, 0, n, n).setIdentity();
  return a;
}

// N x (N+L) cyclic-prefix removal: drops the first L samples.
inline Mat cp_removal(const OfdmGrid& grid) {
  grid.validate();
  const int n = grid.n_subcarriers;
  const int l = grid.cp_len;
  Mat b = Mat::Zero(n, n + l);
  b.block(0, l, n, n).setIdentity();
  return b;
}

// N x N diagonal 0/1 selector for the node's carrier set.
inline Mat subcarrier_selector(const OfdmGrid& grid, int which) {
  grid.validate();
  Mat d = Mat::Zero(grid.n_subcarriers, grid.n_subcarriers);
  for (int k : grid.set_of(which)) d(k, k) = 1.0;
  return d;
}

// |set| x N selector with orthonormal rows: row r is the unit row vector of
// the r-th carrier in ascending order.
inline Mat reduced_selector(const OfdmGrid& grid, int which) {
  grid.validate();
  std::vector<int> idx = grid.set_of(which);
  std::sort(idx.begin(), idx.end());
  Mat d = Mat::Zero(static_cast<Eigen::Index>(idx.size()), grid.n_subcarriers);
  for (size_t r = 0; r < idx.size(); ++r)
    d(static_cast<Eigen::Index>(r), idx[r]) = 1.0;
  return d;
}

// Grid operators materialized once and shared by the whole pipeline.
struct OfdmOps {
  OfdmGrid grid;
  Mat F;     // N x N DFT
  Mat Finv;  // = F adjoint
  Mat A;     // CP insertion
  Mat B;     // CP removal
  Mat D1, D2;
  Mat Dt1, Dt2;

  const Mat& selector(int which) const { return which == 1 ? D1 : D2; }
  const Mat& reduced(int which) const { return which == 1 ? Dt1 : Dt2; }
  int set_size(int which) const {
    return static_cast<int>(grid.set_of(which).size());
  }

  static OfdmOps build(const OfdmGrid& grid) {
    grid.validate();
    OfdmOps ops;
    ops.grid = grid;
    ops.F = dft_matrix(grid.n_subcarriers);
    ops.Finv = ops.F.adjoint();
    ops.A = cp_insertion(grid);
    ops.B = cp_removal(grid);
    ops.D1 = subcarrier_selector(grid, 1);
    ops.D2 = subcarrier_selector(grid, 2);
    ops.Dt1 = reduced_selector(grid, 1);
    ops.Dt2 = reduced_selector(grid, 2);
    return ops;
  }
};

// One OFDM symbol: x = A F^{-1} u. Rejects frequency-domain input that is
// nonzero outside the transmitter's allocated set.
inline Vec ofdm_modulate(const Vec& u, const OfdmGrid& grid, int which) {
  grid.validate();
  if (u.size() != grid.n_subcarriers)
    throw DimensionMismatch("ofdm_modulate: input length must equal N");
  std::vector<char> allowed(static_cast<size_t>(grid.n_subcarriers), 0);
  for (int k : grid.set_of(which)) allowed[static_cast<size_t>(k)] = 1;
  for (int k = 0; k < grid.n_subcarriers; ++k)
    if (!allowed[static_cast<size_t>(k)] && u(k) != Complex(0.0, 0.0))
      throw ConfigError("ofdm_modulate: nonzero entry outside allocated set");
  const Mat f = dft_matrix(grid.n_subcarriers);
  Vec data = f.adjoint() * u;
  Vec x(grid.block_len());
  x.head(grid.cp_len) = data.tail(grid.cp_len);
  x.tail(grid.n_subcarriers) = data;
  return x;
}

}  // namespace fdsim
