#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ratsnas/tensor.hpp"

namespace ratsnas {

// Ordered operation alphabet. "input" and "output" are reserved and must each
// appear exactly once.
class OpVocabulary {
 public:
  explicit OpVocabulary(std::vector<std::string> names);

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  std::size_t index_of(const std::string& name) const;  // UnknownOpError
  bool contains(const std::string& name) const;
  const std::string& name_at(std::size_t i) const { return names_[i]; }

  std::size_t input_index() const { return input_index_; }
  std::size_t output_index() const { return output_index_; }

 private:
  std::vector<std::string> names_;
  std::size_t input_index_ = 0;
  std::size_t output_index_ = 0;
};

// A cell in canonical form: nodes topologically indexed so adjacency is
// strictly upper-triangular, node 0 is "input", node n-1 is "output".
struct CellGraph {
  std::size_t n = 0;
  Tensor adjacency = Tensor::matrix(0, 0);  // n x n over {0,1}
  Tensor ops = Tensor::matrix(0, 0);        // n x d one-hot
};

CellGraph make_cell(Tensor adjacency, Tensor ops);

// Checks every CellGraph invariant, re-indexing nodes topologically when the
// input order is merely sortable rather than already canonical. Idempotent on
// canonical cells.
CellGraph validate_cell(const CellGraph& cell, const OpVocabulary& vocab);

// D^-1 (A + I): self-loops added, each row divided by its sum. Rows of a zero
// matrix become one-hot self rows.
Tensor normalize_adjacency(const Tensor& a);

Tensor encode_operations(const std::vector<std::string>& op_names,
                         const OpVocabulary& vocab);
std::vector<std::string> decode_operations(const Tensor& ops,
                                           const OpVocabulary& vocab);

struct BenchmarkEntry {
  std::string id;
  CellGraph cell;
  double flops = 0.0;     // mega-FLOPs
  double accuracy = 0.0;  // validation accuracy fraction in [0, 1]
};

// Entries plus a permutation sorting them ascending by flops. Ties keep entry
// order so the permutation is reproducible.
struct SearchSpace {
  std::vector<BenchmarkEntry> entries;
  std::vector<std::size_t> flops_order;
};

// Stable ascending flops permutation; ties keep entry order.
std::vector<std::size_t> sort_by_flops(const std::vector<BenchmarkEntry>& entries);

SearchSpace make_search_space(std::vector<BenchmarkEntry> entries);

}  // namespace ratsnas
