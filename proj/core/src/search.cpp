#include "ratsnas/search.hpp"

#include <algorithm>
#include <numeric>

#include "ratsnas/errors.hpp"
#include "ratsnas/rng.hpp"

namespace ratsnas {

namespace {

// rng streams, one per consumer, so arms sharing a seed stay independent
constexpr std::uint64_t kInitPoolStream = 0;
constexpr std::uint64_t kRetrainStreamBase = 1;
constexpr std::uint64_t kRandomSearchStream = 0x52414e44;

double max_accuracy(const SearchSpace& space) {
  double best = 0.0;
  for (const BenchmarkEntry& e : space.entries) {
    best = std::max(best, e.accuracy);
  }
  return best;
}

void retrain(P3sState& state, const P3sOptions& options,
             const SearchSpace& space) {
  std::vector<TrainExample> examples;
  examples.reserve(state.pool.size());
  for (std::size_t i = 0; i < state.pool.size(); ++i) {
    examples.push_back(
        {space.entries[state.pool_entries[i]].cell, state.pool[i].second});
  }
  TrainOptions train = options.train;
  train.seed = mix_seed(state.seed, kRetrainStreamBase + state.t);
  state.params = train_predictor(state.config, examples, train).params;
}

double best_of_pool(const P3sState& state) {
  double best = 0.0;
  for (const auto& [id, accuracy] : state.pool) {
    (void)id;
    best = std::max(best, accuracy);
  }
  return best;
}

}  // namespace

std::pair<std::size_t, std::size_t> refocus_interval(
    std::size_t lo, std::size_t hi, const std::vector<double>& scores,
    std::size_t min_width, RefocusFallback fallback) {
  if (hi < lo) throw Error("refocus: empty interval");
  const std::size_t width = hi - lo + 1;
  if (scores.size() != width) {
    throw LengthMismatchError("refocus: scores do not cover the interval");
  }
  if (width <= min_width) return {lo, hi};

  const std::size_t top = (width + 99) / 100;  // ceil(1%)
  std::vector<std::size_t> order(width);
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + std::ptrdiff_t(top),
                    order.end(), [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  const std::size_t first_len = width / 2;
  std::size_t in_first = 0;
  for (std::size_t i = 0; i < top; ++i) {
    if (order[i] < first_len) ++in_first;
  }
  if (4 * in_first >= 3 * top) return {lo, lo + first_len - 1};
  if (4 * (top - in_first) >= 3 * top) return {lo + first_len, hi};
  if (fallback == RefocusFallback::kLatterHalf) return {lo + first_len, hi};
  return {lo, hi};
}

P3sState p3s_init(const SearchSpace& space, const P3sOptions& options) {
  const std::size_t n = space.entries.size();
  if (options.k == 0 || options.k > n) {
    throw KTooLargeError("p3s: k outside [1, |space|]");
  }
  P3sState state;
  state.lo = 0;
  state.hi = n - 1;
  state.t = 0;
  state.seed = options.seed;
  state.config = options.config;
  state.sampled.assign(n, 0);

  Rng rng(mix_seed(options.seed, kInitPoolStream));
  for (std::size_t idx : rng.sample_without_replacement(n, options.k)) {
    state.sampled[idx] = 1;
    state.pool.emplace_back(space.entries[idx].id, space.entries[idx].accuracy);
    state.pool_entries.push_back(idx);
  }
  retrain(state, options, space);
  return state;
}

StepRecord p3s_step(P3sState& state, const SearchSpace& space,
                    const P3sOptions& options, std::size_t max_new) {
  const std::size_t n = space.entries.size();
  const std::size_t want = max_new == 0 ? options.k : max_new;

  // score the current interval with P_t
  std::vector<std::size_t> interval_entries;
  interval_entries.reserve(state.hi - state.lo + 1);
  for (std::size_t pos = state.lo; pos <= state.hi; ++pos) {
    interval_entries.push_back(space.flops_order[pos]);
  }
  std::vector<double> interval_scores =
      predict_subset(state.config, state.params, space, interval_entries);

  const auto [new_lo, new_hi] =
      refocus_interval(state.lo, state.hi, interval_scores, 2 * options.k,
                       options.fallback);

  // candidates: unsampled entries of the refocused interval, scores reused
  // from the pre-refocus sweep (the new interval is a sub-range of the old)
  std::vector<std::size_t> candidates;
  std::vector<double> cand_scores;
  for (std::size_t pos = new_lo; pos <= new_hi; ++pos) {
    const std::size_t entry = space.flops_order[pos];
    if (!state.sampled[entry]) {
      candidates.push_back(entry);
      cand_scores.push_back(interval_scores[pos - state.lo]);
    }
  }
  state.lo = new_lo;
  state.hi = new_hi;

  bool widened = false;
  if (candidates.size() < want) {
    widened = true;
    candidates.clear();
    for (std::size_t entry = 0; entry < n; ++entry) {
      if (!state.sampled[entry]) candidates.push_back(entry);
    }
    if (candidates.empty()) {
      throw ExhaustedIntervalError("p3s: every entry already sampled");
    }
    cand_scores = predict_subset(state.config, state.params, space, candidates);
  }

  const std::size_t take = std::min(want, candidates.size());
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + std::ptrdiff_t(take),
                    order.end(), [&](std::size_t a, std::size_t b) {
                      if (cand_scores[a] != cand_scores[b]) {
                        return cand_scores[a] > cand_scores[b];
                      }
                      return candidates[a] < candidates[b];
                    });

  StepRecord record;
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t entry = candidates[order[i]];
    const BenchmarkEntry& e = space.entries[entry];
    state.sampled[entry] = 1;
    state.pool.emplace_back(e.id, e.accuracy);
    state.pool_entries.push_back(entry);
    record.sampled_ids.push_back(e.id);
  }
  state.t += 1;
  retrain(state, options, space);

  record.t = state.t;
  record.lo = state.lo;
  record.hi = state.hi;
  record.best_so_far = best_of_pool(state);
  record.widened = widened;
  return record;
}

SearchResult run_p3s(const SearchSpace& space, const P3sOptions& options,
                     std::size_t budget, bool stop_at_optimum) {
  if (budget < options.k) throw Error("p3s: budget smaller than k");
  const double optimum = max_accuracy(space);

  P3sState state = p3s_init(space, options);
  SearchResult result;
  StepRecord init_record;
  init_record.t = 0;
  init_record.lo = state.lo;
  init_record.hi = state.hi;
  for (const auto& [id, accuracy] : state.pool) {
    (void)accuracy;
    result.history.push_back(id);
    init_record.sampled_ids.push_back(id);
  }
  init_record.best_so_far = best_of_pool(state);
  result.steps.push_back(init_record);
  result.best_accuracy = init_record.best_so_far;
  result.samples_used = state.pool.size();

  while (result.samples_used < budget &&
         !(stop_at_optimum && result.best_accuracy == optimum)) {
    const std::size_t allowed =
        std::min(options.k, budget - result.samples_used);
    StepRecord record;
    try {
      record = p3s_step(state, space, options, allowed);
    } catch (const ExhaustedIntervalError&) {
      break;
    }
    for (const std::string& id : record.sampled_ids) {
      result.history.push_back(id);
    }
    result.samples_used += record.sampled_ids.size();
    result.best_accuracy = record.best_so_far;
    result.steps.push_back(std::move(record));
  }
  return result;
}

SearchResult run_random_search(const SearchSpace& space, std::uint64_t seed,
                               std::size_t budget, bool stop_at_optimum) {
  if (budget < 1) throw Error("random search: budget must be >= 1");
  const double optimum = max_accuracy(space);
  const std::size_t n = space.entries.size();

  Rng rng(mix_seed(seed, kRandomSearchStream));
  SearchResult result;
  for (std::size_t idx :
       rng.sample_without_replacement(n, std::min(budget, n))) {
    const BenchmarkEntry& e = space.entries[idx];
    result.history.push_back(e.id);
    result.best_accuracy = std::max(result.best_accuracy, e.accuracy);
    result.samples_used += 1;
    if (stop_at_optimum && result.best_accuracy == optimum) break;
  }
  return result;
}

}  // namespace ratsnas
