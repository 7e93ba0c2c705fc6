#pragma once

#include <span>
#include <utility>
#include <vector>

#include "e2edet/geometry.hpp"
#include "e2edet/losses.hpp"
#include "e2edet/quality.hpp"

namespace e2edet {

/// Injective map from ground-truth index to prediction index.
struct Assignment {
  std::vector<std::pair<int, int>> pairs;  // (gt, pred), ascending gt
  double objective = 0.0;                  // total quality, or total cost for loss matching
  std::vector<int> unmatched;              // gts left without a foreground sample

  /// pred index for gt `i`, or -1.
  int pred_of(int gt) const noexcept;
  friend bool operator==(const Assignment&, const Assignment&) = default;
};

/// Optimal row -> column map of a dense rows x cols matrix (rows <= cols), maximising or
/// minimising the total. Among optima, returns the lexicographically smallest column
/// sequence (up to a 1e-9 relative tolerance on the objective).
std::vector<int> solve_assignment(std::span<const double> weights, int rows, int cols,
                                  bool maximize);

/// Quality-maximising matching. Pairs with zero quality are reported as unmatched.
/// Throws ValidationError when G > N.
Assignment hungarian_max(const QualityMatrix& q);

inline constexpr int kBruteForceMaxColumns = 9;

/// Exhaustive enumeration of all injections; N <= 9. Same output conventions as
/// hungarian_max; the first optimum in lexicographic order wins.
Assignment brute_force_match(const QualityMatrix& q);

/// Matching that minimises the summed foreground loss (focal + weighted GIoU).
Assignment loss_cost_match(std::span<const GroundTruth> gts, std::span<const Prediction> preds,
                           const LossParams& params);

}  // namespace e2edet
