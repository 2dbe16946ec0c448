#include "ratsnas/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "ratsnas/errors.hpp"

namespace ratsnas {

std::vector<double> fractional_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double mean_rank = (double(i) + double(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(const std::vector<double>& pred,
                const std::vector<double>& truth) {
  if (pred.size() != truth.size()) {
    throw LengthMismatchError("spearman: vector lengths differ");
  }
  if (pred.size() < 2) {
    throw TooShortError("spearman: need at least 2 elements");
  }
  const std::vector<double> ra = fractional_ranks(pred);
  const std::vector<double> rb = fractional_ranks(truth);
  const double n = double(ra.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double da = ra[i] - ma;
    const double db = rb[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) {
    std::cerr << "warning: spearman on a constant vector, returning 0\n";
    return 0.0;
  }
  return cov / std::sqrt(va * vb);
}

double mean_topk(const std::vector<double>& scores, const SearchSpace& space,
                 std::size_t k) {
  if (scores.size() != space.entries.size()) {
    throw LengthMismatchError("mean_topk: score count != space size");
  }
  if (k == 0 || k > space.entries.size()) {
    throw KTooLargeError("mean_topk: k outside [1, |space|]");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + std::ptrdiff_t(k),
                    order.end(), [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    acc += space.entries[order[i]].accuracy;
  }
  return acc / double(k) * 100.0;
}

std::size_t samples_to_optimum(const std::vector<std::string>& history,
                               const SearchSpace& space) {
  double best = 0.0;
  for (const BenchmarkEntry& e : space.entries) {
    best = std::max(best, e.accuracy);
  }
  std::unordered_map<std::string, double> acc_by_id;
  acc_by_id.reserve(space.entries.size());
  for (const BenchmarkEntry& e : space.entries) acc_by_id[e.id] = e.accuracy;

  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (!seen.insert(history[i]).second) {
      throw DuplicateIdError("samples_to_optimum: duplicate id '" +
                             history[i] + "'");
    }
    auto it = acc_by_id.find(history[i]);
    if (it == acc_by_id.end()) {
      throw UnknownCellError("samples_to_optimum: id '" + history[i] +
                             "' not in space");
    }
    if (it->second == best) return i + 1;
  }
  return kOptimumNotFound;
}

}  // namespace ratsnas
