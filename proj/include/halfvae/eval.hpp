#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "halfvae/errors.hpp"
#include "halfvae/matrix.hpp"

namespace halfvae {

// Upper bound on N for the exhaustive alignment search (8! * 2^8 assignments).
inline constexpr std::size_t kMaxAlignComponents = 8;

struct AlignmentResult {
  std::vector<std::size_t> permutation;  // estimated row -> truth row
  std::vector<int> signs;                // +1 / -1 per estimated row
  std::vector<double> per_component_rmse;  // indexed by estimated row
  double mean_rmse = 0.0;
};

// Standardize with the population standard deviation.
inline std::vector<double> zscore(std::span<const double> series) {
  if (series.size() < 2) throw DegenerateInputError("zscore: need at least two values");
  const double n = static_cast<double>(series.size());
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= n;
  // Second pass removes the rounding left in `mean`; matters when the offset
  // dwarfs the spread.
  double fix = 0.0;
  for (double v : series) fix += v - mean;
  fix /= n;
  double ss = 0.0;
  for (double v : series) ss += ((v - mean) - fix) * ((v - mean) - fix);
  const double sd = std::sqrt(ss / n);
  if (!(sd > 0.0) || sd <= 1e-300) throw DegenerateInputError("zscore: series is constant");
  std::vector<double> out(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) out[i] = ((series[i] - mean) - fix) / sd;
  return out;
}

inline double rmse(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("rmse: lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  if (a.empty()) throw ShapeError("rmse: empty series");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(a.size()));
}

inline Matrix zscore_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto z = zscore(m.row(r));
    std::copy(z.begin(), z.end(), out.row(r).begin());
  }
  return out;
}

// Optimal permutation x sign assignment of z-scored estimated rows onto
// z-scored truth rows, minimizing the summed per-pair RMSE. Permutations are
// enumerated lexicographically and, within each, sign patterns from all-plus
// upward (row 0 most significant); only a strictly smaller total replaces the
// incumbent, so ties resolve to the earliest candidate.
inline AlignmentResult align_components(const Matrix& estimated, const Matrix& truth) {
  require_same_shape(estimated, truth, "align_components");
  const std::size_t n = truth.rows();
  if (n == 0) throw ShapeError("align_components: no components");
  if (n > kMaxAlignComponents) {
    throw SizeLimitError("align_components: N=" + std::to_string(n) + " exceeds limit of " +
                         std::to_string(kMaxAlignComponents));
  }
  const Matrix e = zscore_rows(estimated);
  const Matrix t = zscore_rows(truth);

  // cost[i][j][0] = rmse(+e_i, t_j), cost[i][j][1] = rmse(-e_i, t_j)
  std::vector<double> cost(n * n * 2);
  std::vector<double> neg(e.cols());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < e.cols(); ++c) neg[c] = -e(i, c);
    for (std::size_t j = 0; j < n; ++j) {
      cost[(i * n + j) * 2] = rmse(e.row(i), t.row(j));
      cost[(i * n + j) * 2 + 1] = rmse(neg, t.row(j));
    }
  }

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  const std::size_t patterns = std::size_t{1} << n;
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> best_perm;
  std::size_t best_mask = 0;
  do {
    for (std::size_t mask = 0; mask < patterns; ++mask) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t flip = (mask >> (n - 1 - i)) & 1U;
        total += cost[(i * n + perm[i]) * 2 + flip];
      }
      if (total < best) {
        best = total;
        best_perm = perm;
        best_mask = mask;
      }
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  AlignmentResult res;
  res.permutation = best_perm;
  res.signs.resize(n);
  res.per_component_rmse.resize(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t flip = (best_mask >> (n - 1 - i)) & 1U;
    res.signs[i] = flip ? -1 : 1;
    res.per_component_rmse[i] = cost[(i * n + best_perm[i]) * 2 + flip];
    sum += res.per_component_rmse[i];
  }
  res.mean_rmse = sum / static_cast<double>(n);
  return res;
}

// Aligned estimate rows reordered to truth order with signs applied (z-scored),
// convenient for overlay plots.
inline Matrix aligned_estimate(const Matrix& estimated, const AlignmentResult& a) {
  const Matrix e = zscore_rows(estimated);
  Matrix out(e.rows(), e.cols());
  for (std::size_t i = 0; i < e.rows(); ++i) {
    auto dst = out.row(a.permutation[i]);
    for (std::size_t c = 0; c < e.cols(); ++c) dst[c] = a.signs[i] * e(i, c);
  }
  return out;
}

struct ModelScore {
  std::string model;
  AlignmentResult alignment;
  // RMSE reported per truth component ("Component 1..N" rows of the table).
  std::vector<double> per_truth_component_rmse;
};

struct MetricsTable {
  std::size_t components = 0;
  std::vector<ModelScore> models;
};

inline MetricsTable score_models(const std::map<std::string, Matrix>& results, const Matrix& truth) {
  MetricsTable table;
  table.components = truth.rows();
  for (const auto& [name, estimated] : results) {
    ModelScore s{name, align_components(estimated, truth), {}};
    s.per_truth_component_rmse.assign(truth.rows(), 0.0);
    for (std::size_t i = 0; i < truth.rows(); ++i) {
      s.per_truth_component_rmse[s.alignment.permutation[i]] = s.alignment.per_component_rmse[i];
    }
    table.models.push_back(std::move(s));
  }
  return table;
}

}  // namespace halfvae
