#include "e2edet/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "e2edet/error.hpp"

namespace e2edet {

int Assignment::pred_of(int gt) const noexcept {
  for (const auto& [g, p] : pairs) {
    if (g == gt) return p;
  }
  return -1;
}

namespace {

struct LapResult {
  std::vector<int> col_of_row;
  std::vector<double> u;  // row potentials
  std::vector<double> v;  // column potentials, <= 0, exactly 0 on unmatched columns
};

// Shortest augmenting path Hungarian method on a rows x cols cost matrix, rows <= cols.
LapResult lap_min(const std::vector<double>& cost, int rows, int cols) {
  const double inf = std::numeric_limits<double>::infinity();
  const auto n = static_cast<std::size_t>(rows);
  const auto m = static_cast<std::size_t>(cols);
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  LapResult r;
  r.col_of_row.assign(n, -1);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) r.col_of_row[p[j] - 1] = static_cast<int>(j - 1);
  }
  r.u.assign(u.begin() + 1, u.end());
  r.v.assign(v.begin() + 1, v.end());
  return r;
}

double total_of(const std::vector<double>& cost, int cols, const std::vector<int>& col_of_row) {
  double acc = 0.0;
  for (std::size_t i = 0; i < col_of_row.size(); ++i) {
    acc += cost[i * static_cast<std::size_t>(cols) + static_cast<std::size_t>(col_of_row[i])];
  }
  return acc;
}

// Optimum of the subproblem where rows [0, fixed.size()) are pinned to `fixed`.
std::vector<int> solve_pinned(const std::vector<double>& cost, int rows, int cols,
                              const std::vector<int>& fixed) {
  const int k = static_cast<int>(fixed.size());
  std::vector<char> taken(static_cast<std::size_t>(cols), 0);
  for (int c : fixed) taken[static_cast<std::size_t>(c)] = 1;
  std::vector<int> free_cols;
  for (int j = 0; j < cols; ++j) {
    if (!taken[static_cast<std::size_t>(j)]) free_cols.push_back(j);
  }
  const int sub_rows = rows - k;
  const int sub_cols = static_cast<int>(free_cols.size());
  std::vector<int> out = fixed;
  if (sub_rows == 0) return out;
  std::vector<double> sub(static_cast<std::size_t>(sub_rows) * static_cast<std::size_t>(sub_cols));
  for (int i = 0; i < sub_rows; ++i) {
    for (int j = 0; j < sub_cols; ++j) {
      sub[static_cast<std::size_t>(i) * static_cast<std::size_t>(sub_cols) +
          static_cast<std::size_t>(j)] =
          cost[static_cast<std::size_t>(i + k) * static_cast<std::size_t>(cols) +
               static_cast<std::size_t>(free_cols[static_cast<std::size_t>(j)])];
    }
  }
  const LapResult r = lap_min(sub, sub_rows, sub_cols);
  for (int c : r.col_of_row) out.push_back(free_cols[static_cast<std::size_t>(c)]);
  return out;
}

}  // namespace

std::vector<int> solve_assignment(std::span<const double> weights, int rows, int cols,
                                  bool maximize) {
  if (rows < 0 || cols < 0 ||
      weights.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
    throw ValidationError("solve_assignment: weight matrix has wrong size");
  }
  if (rows > cols) {
    throw ValidationError("solve_assignment: more rows (" + std::to_string(rows) +
                          ") than columns (" + std::to_string(cols) + ")");
  }
  if (rows == 0) return {};
  std::vector<double> cost(weights.begin(), weights.end());
  double scale = 0.0;
  for (double& c : cost) {
    if (!std::isfinite(c)) throw ValidationError("solve_assignment: non-finite weight");
    if (maximize) c = -c;
    scale = std::max(scale, std::abs(c));
  }
  const LapResult base = lap_min(cost, rows, cols);
  const double optimum = total_of(cost, cols, base.col_of_row);
  const double tol = 1e-9 * std::max(1.0, scale * rows);

  // Lexicographic refinement: for each row in turn, try smaller columns that can still
  // be part of an optimum. Reduced costs from the base duals bound every alternative, so
  // only genuinely tied columns are ever re-solved.
  std::vector<int> current = base.col_of_row;
  std::vector<int> fixed;
  for (int i = 0; i < rows; ++i) {
    const int chosen = current[static_cast<std::size_t>(i)];
    for (int j = 0; j < chosen; ++j) {
      if (std::find(fixed.begin(), fixed.end(), j) != fixed.end()) continue;
      const double reduced = cost[static_cast<std::size_t>(i) * static_cast<std::size_t>(cols) +
                                  static_cast<std::size_t>(j)] -
                             base.u[static_cast<std::size_t>(i)] -
                             base.v[static_cast<std::size_t>(j)];
      if (reduced > tol) continue;
      std::vector<int> pinned = fixed;
      pinned.push_back(j);
      std::vector<int> candidate = solve_pinned(cost, rows, cols, pinned);
      if (total_of(cost, cols, candidate) <= optimum + tol) {
        current = std::move(candidate);
        break;
      }
    }
    fixed.push_back(current[static_cast<std::size_t>(i)]);
  }
  return current;
}

namespace {

Assignment quality_assignment(const QualityMatrix& q, const std::vector<int>& col_of_row) {
  Assignment a;
  for (int i = 0; i < q.g; ++i) {
    const int j = col_of_row[static_cast<std::size_t>(i)];
    const double value = q(i, j);
    if (value > 0.0) {
      a.pairs.emplace_back(i, j);
    } else {
      a.unmatched.push_back(i);
    }
    a.objective += value;
  }
  return a;
}

void check_quality(const QualityMatrix& q) {
  if (q.values.size() != static_cast<std::size_t>(q.g) * static_cast<std::size_t>(q.n)) {
    throw ValidationError("quality matrix size does not match its dimensions");
  }
  if (q.g > q.n) {
    throw ValidationError("matching needs G <= N (got G=" + std::to_string(q.g) +
                          ", N=" + std::to_string(q.n) + ")");
  }
}

}  // namespace

Assignment hungarian_max(const QualityMatrix& q) {
  check_quality(q);
  return quality_assignment(q, solve_assignment(q.values, q.g, q.n, true));
}

Assignment brute_force_match(const QualityMatrix& q) {
  check_quality(q);
  if (q.n > kBruteForceMaxColumns) {
    throw ValidationError("brute_force_match supports at most " +
                          std::to_string(kBruteForceMaxColumns) + " predictions");
  }
  const int rows = q.g;
  std::vector<int> current(static_cast<std::size_t>(rows), -1);
  std::vector<int> best;
  double best_value = -std::numeric_limits<double>::infinity();
  std::vector<char> used(static_cast<std::size_t>(q.n), 0);

  auto recurse = [&](auto&& self, int row, double acc) -> void {
    if (row == rows) {
      if (acc > best_value) {
        best_value = acc;
        best = current;
      }
      return;
    }
    for (int j = 0; j < q.n; ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      used[static_cast<std::size_t>(j)] = 1;
      current[static_cast<std::size_t>(row)] = j;
      self(self, row + 1, acc + q(row, j));
      used[static_cast<std::size_t>(j)] = 0;
    }
  };
  recurse(recurse, 0, 0.0);
  return quality_assignment(q, best);
}

Assignment loss_cost_match(std::span<const GroundTruth> gts, std::span<const Prediction> preds,
                           const LossParams& params) {
  params.validate();
  const int rows = static_cast<int>(gts.size());
  const int cols = static_cast<int>(preds.size());
  if (rows > cols) {
    throw ValidationError("loss_cost_match needs G <= N (got G=" + std::to_string(rows) +
                          ", N=" + std::to_string(cols) + ")");
  }
  std::vector<double> cost(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      cost[static_cast<std::size_t>(i) * static_cast<std::size_t>(cols) +
           static_cast<std::size_t>(j)] =
          foreground_loss(gts[static_cast<std::size_t>(i)], preds[static_cast<std::size_t>(j)],
                          params);
    }
  }
  const std::vector<int> sol = solve_assignment(cost, rows, cols, false);
  Assignment a;
  for (int i = 0; i < rows; ++i) {
    const int j = sol[static_cast<std::size_t>(i)];
    a.pairs.emplace_back(i, j);
    a.objective += cost[static_cast<std::size_t>(i) * static_cast<std::size_t>(cols) +
                        static_cast<std::size_t>(j)];
  }
  return a;
}

}  // namespace e2edet
