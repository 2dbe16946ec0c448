#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ratsnas/cell.hpp"

namespace ratsnas {

// Sentinel for a history that never reaches the optimum.
inline constexpr std::size_t kOptimumNotFound = std::size_t(-1);

struct EvalReport {
  double m_acc = 0.0;  // percent
  double psp = 0.0;
  std::size_t n_space = 0;
  std::size_t k = 0;
};

// Average ranks, 1-based; ties share the mean rank of their block.
std::vector<double> fractional_ranks(const std::vector<double>& values);

// Pearson correlation of average ranks. A constant input has no defined rank
// correlation; returns 0 and warns on stderr because untrained predictors can
// emit constants.
double spearman(const std::vector<double>& pred,
                const std::vector<double>& truth);

// Mean ground-truth accuracy (percent) of the k entries with the highest
// scores; ties broken by lower entry index.
double mean_topk(const std::vector<double>& scores, const SearchSpace& space,
                 std::size_t k);

// 1-based position of the first history id whose accuracy attains the space
// maximum; kOptimumNotFound if the history never does.
std::size_t samples_to_optimum(const std::vector<std::string>& history,
                               const SearchSpace& space);

}  // namespace ratsnas
