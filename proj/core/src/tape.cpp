#include "ratsnas/tape.hpp"

#include <cmath>
#include <utility>

#include "ratsnas/errors.hpp"

namespace ratsnas {

Tape::NodeId Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

bool Tape::any_needs_grad(const std::vector<NodeId>& parents) const {
  for (NodeId p : parents) {
    if (nodes_[p].needs_grad) return true;
  }
  return false;
}

Tape::NodeId Tape::leaf(Tensor value, bool requires_grad) {
  return push({Op::kLeaf, {}, std::move(value), {}, 0.0, requires_grad});
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
  Tensor v = ratsnas::matmul(nodes_[a].value, nodes_[b].value);
  return push({Op::kMatmul, {a, b}, std::move(v), {}, 0.0,
               any_needs_grad({a, b})});
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  Tensor v = ratsnas::add(nodes_[a].value, nodes_[b].value);
  return push(
      {Op::kAdd, {a, b}, std::move(v), {}, 0.0, any_needs_grad({a, b})});
}

Tape::NodeId Tape::add_rowvec(NodeId m, NodeId row) {
  Tensor v = ratsnas::add_rowvec(nodes_[m].value, nodes_[row].value);
  return push({Op::kAddRowvec, {m, row}, std::move(v), {}, 0.0,
               any_needs_grad({m, row})});
}

Tape::NodeId Tape::hadamard(NodeId a, NodeId b) {
  Tensor v = ratsnas::hadamard(nodes_[a].value, nodes_[b].value);
  return push(
      {Op::kHadamard, {a, b}, std::move(v), {}, 0.0, any_needs_grad({a, b})});
}

Tape::NodeId Tape::concat_cols(const std::vector<NodeId>& parts) {
  std::vector<const Tensor*> vals;
  vals.reserve(parts.size());
  for (NodeId p : parts) vals.push_back(&nodes_[p].value);
  Tensor v = ratsnas::concat_cols(vals);
  return push(
      {Op::kConcatCols, parts, std::move(v), {}, 0.0, any_needs_grad(parts)});
}

Tape::NodeId Tape::relu(NodeId a) {
  Tensor v = ratsnas::relu(nodes_[a].value);
  return push({Op::kRelu, {a}, std::move(v), {}, 0.0, any_needs_grad({a})});
}

Tape::NodeId Tape::sigmoid(NodeId a) {
  Tensor v = ratsnas::sigmoid(nodes_[a].value);
  return push({Op::kSigmoid, {a}, std::move(v), {}, 0.0, any_needs_grad({a})});
}

Tape::NodeId Tape::clamp01(NodeId a) {
  Tensor v = ratsnas::clamp01(nodes_[a].value);
  return push({Op::kClamp01, {a}, std::move(v), {}, 0.0, any_needs_grad({a})});
}

Tape::NodeId Tape::mean_rows(NodeId m, std::vector<double> row_mask) {
  Tensor v = ratsnas::mean_rows(nodes_[m].value, row_mask);
  return push({Op::kMeanRows, {m}, std::move(v), std::move(row_mask), 0.0,
               any_needs_grad({m})});
}

Tape::NodeId Tape::mse(NodeId a, NodeId b) {
  Tensor v = ratsnas::mse(nodes_[a].value, nodes_[b].value);
  return push(
      {Op::kMse, {a, b}, std::move(v), {}, 0.0, any_needs_grad({a, b})});
}

Tape::NodeId Tape::transpose(NodeId m) {
  Tensor v = ratsnas::transpose(nodes_[m].value);
  return push(
      {Op::kTranspose, {m}, std::move(v), {}, 0.0, any_needs_grad({m})});
}

Tape::NodeId Tape::row_normalize(NodeId m) {
  Tensor v = ratsnas::row_normalize(nodes_[m].value);
  return push(
      {Op::kRowNormalize, {m}, std::move(v), {}, 0.0, any_needs_grad({m})});
}

Tape::NodeId Tape::scale(NodeId a, double c) {
  Tensor v = ratsnas::scale(nodes_[a].value, c);
  return push({Op::kScale, {a}, std::move(v), {}, c, any_needs_grad({a})});
}

const Tensor& Tape::value(NodeId id) const { return nodes_[id].value; }

void Tape::truncate(std::size_t n) {
  if (n > nodes_.size()) throw Error("truncate: beyond tape end");
  nodes_.resize(n);
}

std::vector<Tensor> Tape::backprop(NodeId output) const {
  if (output >= nodes_.size()) throw Error("backprop: node id out of range");
  if (nodes_[output].value.size() != 1) {
    throw NotScalarError("backprop: output is not scalar");
  }
  std::vector<Tensor> grads;
  grads.reserve(nodes_.size());
  for (const Node& n : nodes_) grads.push_back(Tensor::zeros_like(n.value));
  grads[output][0] = 1.0;

  for (std::size_t id = output + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (node.op == Op::kLeaf || !node.needs_grad) continue;
    const Tensor& g = grads[id];

    switch (node.op) {
      case Op::kMatmul: {
        const Tensor& a = nodes_[node.parents[0]].value;
        const Tensor& b = nodes_[node.parents[1]].value;
        Tensor& da = grads[node.parents[0]];
        Tensor& db = grads[node.parents[1]];
        const std::size_t n = a.rows(), m = a.cols(), p = b.cols();
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t k = 0; k < m; ++k) {
            double acc = 0.0;
            for (std::size_t j = 0; j < p; ++j) acc += g(i, j) * b(k, j);
            da(i, k) += acc;
          }
        }
        for (std::size_t k = 0; k < m; ++k) {
          for (std::size_t j = 0; j < p; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) acc += a(i, k) * g(i, j);
            db(k, j) += acc;
          }
        }
        break;
      }
      case Op::kAdd: {
        Tensor& da = grads[node.parents[0]];
        Tensor& db = grads[node.parents[1]];
        for (std::size_t i = 0; i < g.size(); ++i) {
          da[i] += g[i];
          db[i] += g[i];
        }
        break;
      }
      case Op::kAddRowvec: {
        Tensor& dm = grads[node.parents[0]];
        Tensor& drow = grads[node.parents[1]];
        const std::size_t r = node.value.rows(), c = node.value.cols();
        for (std::size_t i = 0; i < r; ++i) {
          for (std::size_t j = 0; j < c; ++j) {
            dm(i, j) += g(i, j);
            drow[j] += g(i, j);
          }
        }
        break;
      }
      case Op::kHadamard: {
        const Tensor& a = nodes_[node.parents[0]].value;
        const Tensor& b = nodes_[node.parents[1]].value;
        Tensor& da = grads[node.parents[0]];
        Tensor& db = grads[node.parents[1]];
        for (std::size_t i = 0; i < g.size(); ++i) {
          da[i] += g[i] * b[i];
          db[i] += g[i] * a[i];
        }
        break;
      }
      case Op::kConcatCols: {
        const std::size_t rows = node.value.rows();
        const std::size_t total = node.value.cols();
        std::size_t base = 0;
        for (NodeId p : node.parents) {
          Tensor& dp = grads[p];
          const std::size_t c = nodes_[p].value.cols();
          for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
              dp(i, j) += g[i * total + base + j];
            }
          }
          base += c;
        }
        break;
      }
      case Op::kRelu: {
        const Tensor& a = nodes_[node.parents[0]].value;
        Tensor& da = grads[node.parents[0]];
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (a[i] > 0.0) da[i] += g[i];
        }
        break;
      }
      case Op::kSigmoid: {
        Tensor& da = grads[node.parents[0]];
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = node.value[i];
          da[i] += g[i] * y * (1.0 - y);
        }
        break;
      }
      case Op::kClamp01: {
        // zero gradient at and beyond the boundaries
        const Tensor& a = nodes_[node.parents[0]].value;
        Tensor& da = grads[node.parents[0]];
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (a[i] > 0.0 && a[i] < 1.0) da[i] += g[i];
        }
        break;
      }
      case Op::kMeanRows: {
        const Tensor& m = nodes_[node.parents[0]].value;
        Tensor& dm = grads[node.parents[0]];
        const std::size_t r = m.rows(), c = m.cols();
        double count = 0.0;
        for (std::size_t i = 0; i < r; ++i) {
          if (node.mask.empty() || node.mask[i] != 0.0) count += 1.0;
        }
        for (std::size_t i = 0; i < r; ++i) {
          if (!node.mask.empty() && node.mask[i] == 0.0) continue;
          for (std::size_t j = 0; j < c; ++j) dm(i, j) += g[j] / count;
        }
        break;
      }
      case Op::kMse: {
        const Tensor& a = nodes_[node.parents[0]].value;
        const Tensor& b = nodes_[node.parents[1]].value;
        Tensor& da = grads[node.parents[0]];
        Tensor& db = grads[node.parents[1]];
        const double s = 2.0 * g[0] / static_cast<double>(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
          const double d = s * (a[i] - b[i]);
          da[i] += d;
          db[i] -= d;
        }
        break;
      }
      case Op::kTranspose: {
        Tensor& dm = grads[node.parents[0]];
        const std::size_t r = node.value.rows(), c = node.value.cols();
        for (std::size_t i = 0; i < r; ++i) {
          for (std::size_t j = 0; j < c; ++j) dm(j, i) += g(i, j);
        }
        break;
      }
      case Op::kRowNormalize: {
        // y_ij = (x_ij + d_ij) / r_i with r_i = 1 + sum_k x_ik, so
        // dx_il = (g_il - sum_j g_ij y_ij) / r_i.
        const Tensor& x = nodes_[node.parents[0]].value;
        const Tensor& y = node.value;
        Tensor& dx = grads[node.parents[0]];
        const std::size_t n = x.rows();
        for (std::size_t i = 0; i < n; ++i) {
          double r = 1.0;
          for (std::size_t k = 0; k < n; ++k) r += x(i, k);
          double dot = 0.0;
          for (std::size_t j = 0; j < n; ++j) dot += g(i, j) * y(i, j);
          for (std::size_t l = 0; l < n; ++l) {
            dx(i, l) += (g(i, l) - dot) / r;
          }
        }
        break;
      }
      case Op::kScale: {
        Tensor& da = grads[node.parents[0]];
        for (std::size_t i = 0; i < g.size(); ++i) da[i] += node.aux * g[i];
        break;
      }
      case Op::kLeaf:
        break;
    }
  }
  return grads;
}

std::vector<Tensor> numeric_gradients(const TapeFn& build,
                                      const std::vector<Tensor>& params,
                                      double h) {
  auto eval = [&](const std::vector<Tensor>& p) {
    Tape tape;
    std::vector<Tape::NodeId> ids;
    ids.reserve(p.size());
    for (const Tensor& t : p) ids.push_back(tape.leaf(t, true));
    return tape.value(build(tape, ids)).item();
  };
  std::vector<Tensor> grads;
  grads.reserve(params.size());
  std::vector<Tensor> work = params;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor g = Tensor::zeros_like(params[pi]);
    for (std::size_t i = 0; i < params[pi].size(); ++i) {
      const double orig = work[pi][i];
      work[pi][i] = orig + h;
      const double up = eval(work);
      work[pi][i] = orig - h;
      const double down = eval(work);
      work[pi][i] = orig;
      g[i] = (up - down) / (2.0 * h);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

GradCheckReport compare_gradients(const std::vector<Tensor>& analytic,
                                  const std::vector<Tensor>& numeric,
                                  double tolerance) {
  if (analytic.size() != numeric.size()) {
    throw ShapeMismatchError("compare_gradients: parameter counts differ");
  }
  GradCheckReport report;
  for (std::size_t pi = 0; pi < analytic.size(); ++pi) {
    if (!analytic[pi].same_shape(numeric[pi])) {
      throw ShapeMismatchError("compare_gradients: gradient shapes differ");
    }
    for (std::size_t i = 0; i < analytic[pi].size(); ++i) {
      const double a = analytic[pi][i];
      const double n = numeric[pi][i];
      const double rel =
          std::abs(a - n) / std::max({1.0, std::abs(a), std::abs(n)});
      report.max_rel_error = std::max(report.max_rel_error, rel);
      if (rel >= tolerance) {
        report.failures.push_back({pi, i, a, n, rel});
      }
    }
  }
  report.pass = report.failures.empty();
  return report;
}

GradCheckReport grad_check(const TapeFn& build,
                           const std::vector<Tensor>& params, double tolerance,
                           double h) {
  Tape tape;
  std::vector<Tape::NodeId> ids;
  ids.reserve(params.size());
  for (const Tensor& t : params) ids.push_back(tape.leaf(t, true));
  const Tape::NodeId out = build(tape, ids);
  const std::vector<Tensor> all = tape.backprop(out);
  std::vector<Tensor> analytic;
  analytic.reserve(ids.size());
  for (Tape::NodeId id : ids) analytic.push_back(all[id]);
  return compare_gradients(analytic, numeric_gradients(build, params, h),
                           tolerance);
}

}  // namespace ratsnas
