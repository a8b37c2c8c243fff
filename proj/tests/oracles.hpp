#pragma once

// Independent re-implementations used as test oracles. They deliberately avoid
// the library's helpers.

#include <cmath>
#include <vector>

#include "halfvae/matrix.hpp"

namespace oracle {

inline std::vector<double> standardize(std::span<const double> x) {
  long double mean = 0.0L;
  for (double v : x) mean += v;
  mean /= static_cast<long double>(x.size());
  long double ss = 0.0L;
  for (double v : x) ss += (v - mean) * (v - mean);
  const long double sd = std::sqrt(ss / static_cast<long double>(x.size()));
  std::vector<double> out;
  for (double v : x) out.push_back(static_cast<double>((v - mean) / sd));
  return out;
}

inline double rms_difference(const std::vector<double>& a, const std::vector<double>& b, int sign) {
  long double acc = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const long double d = sign * a[i] - b[i];
    acc += d * d;
  }
  return static_cast<double>(std::sqrt(acc / static_cast<long double>(a.size())));
}

struct Alignment {
  std::vector<std::size_t> permutation;
  std::vector<int> signs;
  double mean_rmse = INFINITY;
};

// Depth-first enumeration: truth rows in increasing order (lexicographic
// permutations) and, inside each permutation, sign vectors with + before -.
inline Alignment brute_force_align(const halfvae::Matrix& est, const halfvae::Matrix& truth) {
  const std::size_t n = est.rows();
  std::vector<std::vector<double>> e, t;
  for (std::size_t i = 0; i < n; ++i) {
    e.push_back(standardize(est.row(i)));
    t.push_back(standardize(truth.row(i)));
  }
  Alignment best;
  double best_total = INFINITY;
  std::vector<std::size_t> perm;
  std::vector<bool> used(n, false);

  auto score_signs = [&](auto&& self, std::vector<int>& signs) -> void {
    if (signs.size() == n) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) total += rms_difference(e[i], t[perm[i]], signs[i]);
      if (total < best_total) {
        best_total = total;
        best.permutation = perm;
        best.signs = signs;
        best.mean_rmse = total / static_cast<double>(n);
      }
      return;
    }
    for (int s : {1, -1}) {
      signs.push_back(s);
      self(self, signs);
      signs.pop_back();
    }
  };
  auto permute = [&](auto&& self) -> void {
    if (perm.size() == n) {
      std::vector<int> signs;
      score_signs(score_signs, signs);
      return;
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (used[j]) continue;
      used[j] = true;
      perm.push_back(j);
      self(self);
      perm.pop_back();
      used[j] = false;
    }
  };
  permute(permute);
  return best;
}

}  // namespace oracle
