#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "ratsnas/tensor.hpp"

namespace ratsnas {

// Append-only record of primitive applications. Parent indices are always
// smaller than the child index, so a single reverse sweep is a valid
// backpropagation order.
class Tape {
 public:
  using NodeId = std::size_t;

  NodeId leaf(Tensor value, bool requires_grad = false);
  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId add_rowvec(NodeId m, NodeId row);
  NodeId hadamard(NodeId a, NodeId b);
  NodeId concat_cols(const std::vector<NodeId>& parts);
  NodeId relu(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId clamp01(NodeId a);
  NodeId mean_rows(NodeId m, std::vector<double> row_mask = {});
  NodeId mse(NodeId a, NodeId b);
  NodeId transpose(NodeId m);
  NodeId row_normalize(NodeId m);
  NodeId scale(NodeId a, double c);

  const Tensor& value(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }

  // Drops every node at index >= n so the tape can be reused across
  // evaluations that share a common prefix (e.g. parameter leaves).
  void truncate(std::size_t n);

  // Gradient of the scalar at `output` w.r.t. every node value, indexed by
  // NodeId. Nodes the output does not depend on get zeros.
  std::vector<Tensor> backprop(NodeId output) const;

 private:
  enum class Op {
    kLeaf,
    kMatmul,
    kAdd,
    kAddRowvec,
    kHadamard,
    kConcatCols,
    kRelu,
    kSigmoid,
    kClamp01,
    kMeanRows,
    kMse,
    kTranspose,
    kRowNormalize,
    kScale,
  };
  struct Node {
    Op op;
    std::vector<NodeId> parents;
    Tensor value;
    std::vector<double> mask;  // mean_rows only
    double aux = 0.0;          // scale factor
    bool needs_grad = false;
  };

  NodeId push(Node node);
  bool any_needs_grad(const std::vector<NodeId>& parents) const;

  std::vector<Node> nodes_;
};

// Builds an expression on a fresh tape from parameter leaves and returns the
// scalar output node.
using TapeFn =
    std::function<Tape::NodeId(Tape&, const std::vector<Tape::NodeId>&)>;

struct GradCheckFailure {
  std::size_t param = 0;
  std::size_t coord = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  bool pass = false;
  double max_rel_error = 0.0;
  std::vector<GradCheckFailure> failures;
};

// Central finite differences of the expression's scalar output, one rebuild
// per perturbed coordinate.
std::vector<Tensor> numeric_gradients(const TapeFn& build,
                                      const std::vector<Tensor>& params,
                                      double h = 1e-5);

// Relative error |a - n| / max(1, |a|, |n|) per coordinate; pass iff the max
// stays below tolerance.
GradCheckReport compare_gradients(const std::vector<Tensor>& analytic,
                                  const std::vector<Tensor>& numeric,
                                  double tolerance);

GradCheckReport grad_check(const TapeFn& build,
                           const std::vector<Tensor>& params, double tolerance,
                           double h = 1e-5);

}  // namespace ratsnas
