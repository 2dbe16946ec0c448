#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ratsnas/cell.hpp"
#include "ratsnas/predictors.hpp"

namespace ratsnas {

// What the focus interval does when the top predictions split below the 75%
// threshold: keep the current interval, or jump to the latter half.
enum class RefocusFallback { kKeep, kLatterHalf };

struct P3sOptions {
  std::size_t k = 10;  // per-iteration sample count and initial pool size
  std::uint64_t seed = 0;
  PredictorConfig config;
  TrainOptions train;  // train.seed is ignored; retrains derive their own
  RefocusFallback fallback = RefocusFallback::kKeep;
};

struct P3sState {
  std::size_t lo = 0;  // focus interval, positions into space.flops_order
  std::size_t hi = 0;
  std::size_t t = 0;
  std::vector<std::pair<std::string, double>> pool;  // (id, accuracy)
  std::vector<std::size_t> pool_entries;  // entry indices, parallel to pool
  PredictorConfig config;
  PredictorParams params;
  std::uint64_t seed = 0;
  std::vector<char> sampled;  // per entry index
};

struct StepRecord {
  std::size_t t = 0;
  std::size_t lo = 0;
  std::size_t hi = 0;
  std::vector<std::string> sampled_ids;
  double best_so_far = 0.0;
  bool widened = false;  // interval was exhausted; selected from full space
};

struct SearchResult {
  std::vector<std::string> history;  // evaluated ids in evaluation order
  double best_accuracy = 0.0;
  std::size_t samples_used = 0;
  std::vector<StepRecord> steps;
};

// Halving rule on flops positions [lo, hi] given scores aligned to positions:
// take the top ceil(1%) by score, and if at least 75% of them sit in one half
// move there; otherwise apply the fallback. Intervals at width <= min_width
// stop halving.
std::pair<std::size_t, std::size_t> refocus_interval(
    std::size_t lo, std::size_t hi, const std::vector<double>& scores,
    std::size_t min_width, RefocusFallback fallback);

// k random entries as the initial pool, predictor trained on them, interval
// spanning the whole space.
P3sState p3s_init(const SearchSpace& space, const P3sOptions& options);

// One iteration: refocus, pick the top max_new (default k) unsampled entries
// of the interval by predicted score (ties by lower entry index), query their
// accuracies, retrain from scratch on the grown pool. When the interval has
// fewer unsampled entries than requested the selection widens to the full
// space for this step; ExhaustedIntervalError only when nothing is left
// anywhere. max_new = 0 means options.k.
StepRecord p3s_step(P3sState& state, const SearchSpace& space,
                    const P3sOptions& options, std::size_t max_new = 0);

SearchResult run_p3s(const SearchSpace& space, const P3sOptions& options,
                     std::size_t budget, bool stop_at_optimum);

// Uniform sampling without replacement under the same accounting.
SearchResult run_random_search(const SearchSpace& space, std::uint64_t seed,
                               std::size_t budget, bool stop_at_optimum);

}  // namespace ratsnas
