#include "ratsnas/cell.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <unordered_set>

#include "ratsnas/errors.hpp"

namespace ratsnas {

OpVocabulary::OpVocabulary(std::vector<std::string> names)
    : names_(std::move(names)) {
  std::unordered_set<std::string> seen;
  std::size_t inputs = 0, outputs = 0;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    const std::string& nm = names_[i];
    if (nm.empty()) throw Error("vocabulary: empty operation name");
    if (!seen.insert(nm).second) {
      throw Error("vocabulary: duplicate operation name '" + nm + "'");
    }
    if (nm == "input") {
      input_index_ = i;
      ++inputs;
    } else if (nm == "output") {
      output_index_ = i;
      ++outputs;
    }
  }
  if (inputs != 1 || outputs != 1) {
    throw Error("vocabulary: 'input' and 'output' must each appear once");
  }
}

std::size_t OpVocabulary::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  throw UnknownOpError("unknown operation '" + name + "'");
}

bool OpVocabulary::contains(const std::string& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

CellGraph make_cell(Tensor adjacency, Tensor ops) {
  CellGraph cell;
  cell.n = adjacency.is_matrix() ? adjacency.rows() : 0;
  cell.adjacency = std::move(adjacency);
  cell.ops = std::move(ops);
  return cell;
}

namespace {

std::size_t one_hot_index(const Tensor& ops, std::size_t row) {
  std::size_t hits = 0, idx = 0;
  for (std::size_t j = 0; j < ops.cols(); ++j) {
    const double v = ops(row, j);
    if (v == 1.0) {
      ++hits;
      idx = j;
    } else if (v != 0.0) {
      throw OneHotError("ops row " + std::to_string(row) +
                        " has a non-binary entry");
    }
  }
  if (hits != 1) {
    throw OneHotError("ops row " + std::to_string(row) + " has " +
                      std::to_string(hits) + " ones");
  }
  return idx;
}

// Kahn's algorithm with a fixed tie-break: the input node drains first, the
// output node last, otherwise lowest original index. Any input/output-first
// topological order exists iff this one is valid, so validation below stays
// equivalent to exhaustive search.
std::vector<std::size_t> topo_order(const Tensor& adj, std::size_t input_node,
                                    std::size_t output_node) {
  const std::size_t n = adj.rows();
  std::vector<std::size_t> indeg(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (adj(i, j) != 0.0) ++indeg[j];
    }
  }
  auto priority = [&](std::size_t v) {
    if (v == input_node) return std::pair<int, std::size_t>{0, v};
    if (v == output_node) return std::pair<int, std::size_t>{2, v};
    return std::pair<int, std::size_t>{1, v};
  };
  std::set<std::pair<std::pair<int, std::size_t>, std::size_t>> ready;
  for (std::size_t v = 0; v < n; ++v) {
    if (indeg[v] == 0) ready.insert({priority(v), v});
  }
  std::vector<std::size_t> order;
  order.reserve(n);
  while (!ready.empty()) {
    const std::size_t v = ready.begin()->second;
    ready.erase(ready.begin());
    order.push_back(v);
    for (std::size_t j = 0; j < n; ++j) {
      if (adj(v, j) != 0.0 && --indeg[j] == 0) ready.insert({priority(j), j});
    }
  }
  if (order.size() != n) throw CycleError("adjacency contains a cycle");
  return order;
}

}  // namespace

CellGraph validate_cell(const CellGraph& cell, const OpVocabulary& vocab) {
  if (cell.n < 2) throw ShapeError("cell: need at least 2 nodes");
  if (!cell.adjacency.is_matrix() || cell.adjacency.rows() != cell.n ||
      cell.adjacency.cols() != cell.n) {
    throw ShapeError("cell: adjacency is not n x n");
  }
  if (!cell.ops.is_matrix() || cell.ops.rows() != cell.n ||
      cell.ops.cols() != vocab.size()) {
    throw ShapeError("cell: ops is not n x |vocab|");
  }
  const std::size_t n = cell.n;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double v = cell.adjacency(i, j);
      if (v != 0.0 && v != 1.0) {
        throw ShapeError("cell: adjacency entry is not 0/1");
      }
      if (i == j && v != 0.0) throw CycleError("cell: self-loop");
    }
  }

  std::size_t input_node = n, output_node = n;
  std::vector<std::size_t> op_idx(n);
  for (std::size_t i = 0; i < n; ++i) {
    op_idx[i] = one_hot_index(cell.ops, i);
    if (op_idx[i] == vocab.input_index()) {
      if (input_node != n) throw TerminalError("cell: two input nodes");
      input_node = i;
    } else if (op_idx[i] == vocab.output_index()) {
      if (output_node != n) throw TerminalError("cell: two output nodes");
      output_node = i;
    }
  }
  if (input_node == n) throw TerminalError("cell: no input node");
  if (output_node == n) throw TerminalError("cell: no output node");

  for (std::size_t i = 0; i < n; ++i) {
    if (cell.adjacency(i, input_node) != 0.0) {
      throw TerminalError("cell: input node has an incoming trail");
    }
    if (cell.adjacency(output_node, i) != 0.0) {
      throw TerminalError("cell: output node has an outgoing trail");
    }
  }

  const std::vector<std::size_t> order =
      topo_order(cell.adjacency, input_node, output_node);
  if (order.front() != input_node) {
    throw TerminalError("cell: input node is not a source");
  }
  if (order.back() != output_node) {
    throw TerminalError("cell: output node is not the unique sink position");
  }

  std::vector<std::size_t> rank(n);
  for (std::size_t k = 0; k < n; ++k) rank[order[k]] = k;

  Tensor adj = Tensor::matrix(n, n);
  Tensor ops = Tensor::matrix(n, vocab.size());
  for (std::size_t i = 0; i < n; ++i) {
    ops(rank[i], op_idx[i]) = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (cell.adjacency(i, j) != 0.0) adj(rank[i], rank[j]) = 1.0;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      if (adj(i, j) != 0.0) {
        throw CycleError("cell: edge against topological order");
      }
    }
  }
  return make_cell(std::move(adj), std::move(ops));
}

Tensor normalize_adjacency(const Tensor& a) { return row_normalize(a); }

Tensor encode_operations(const std::vector<std::string>& op_names,
                         const OpVocabulary& vocab) {
  Tensor out = Tensor::matrix(op_names.size(), vocab.size());
  for (std::size_t i = 0; i < op_names.size(); ++i) {
    out(i, vocab.index_of(op_names[i])) = 1.0;
  }
  return out;
}

std::vector<std::string> decode_operations(const Tensor& ops,
                                           const OpVocabulary& vocab) {
  if (!ops.is_matrix() || ops.cols() != vocab.size()) {
    throw ShapeError("decode: ops is not n x |vocab|");
  }
  std::vector<std::string> out;
  out.reserve(ops.rows());
  for (std::size_t i = 0; i < ops.rows(); ++i) {
    out.push_back(vocab.name_at(one_hot_index(ops, i)));
  }
  return out;
}

std::vector<std::size_t> sort_by_flops(
    const std::vector<BenchmarkEntry>& entries) {
  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return entries[a].flops < entries[b].flops;
                   });
  return order;
}

SearchSpace make_search_space(std::vector<BenchmarkEntry> entries) {
  if (entries.empty()) throw Error("search space: no entries");
  std::unordered_set<std::string> ids;
  for (const BenchmarkEntry& e : entries) {
    if (!ids.insert(e.id).second) {
      throw DuplicateIdError("search space: duplicate id '" + e.id + "'");
    }
    if (e.flops < 0.0) throw Error("search space: negative flops");
    if (e.accuracy < 0.0 || e.accuracy > 1.0) {
      throw Error("search space: accuracy outside [0, 1]");
    }
  }
  SearchSpace space;
  space.flops_order = sort_by_flops(entries);
  space.entries = std::move(entries);
  return space;
}

}  // namespace ratsnas
