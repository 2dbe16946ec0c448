#include "ratsnas/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ratsnas/errors.hpp"

namespace ratsnas {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

void check_finite(const std::vector<double>& data, const char* context) {
  for (double v : data) {
    if (!std::isfinite(v)) {
      throw NonFiniteError(std::string(context) +
                           ": tensor contains NaN or Inf");
    }
  }
}

std::string shape_str(const Tensor& t) {
  std::string s = "[";
  for (std::size_t i = 0; i < t.shape().size(); ++i) {
    if (i) s += ",";
    s += std::to_string(t.shape()[i]);
  }
  return s + "]";
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeMismatchError(std::string(op) + ": shapes " + shape_str(a) +
                             " and " + shape_str(b) + " differ");
  }
}

void require_matrix(const Tensor& t, const char* op) {
  if (!t.is_matrix()) {
    throw ShapeMismatchError(std::string(op) + ": expected rank-2 tensor, got " +
                             shape_str(t));
  }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_product(shape_) != data_.size()) {
    throw ShapeMismatchError("tensor: shape does not match data length");
  }
  ratsnas::check_finite(data_, "tensor");
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::vector(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols) {
  return Tensor({rows, cols}, std::vector<double>(rows * cols, 0.0));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> data) {
  return Tensor({rows, cols}, std::move(data));
}

Tensor Tensor::zeros(const std::vector<std::size_t>& shape) {
  return Tensor(shape, std::vector<double>(shape_product(shape), 0.0));
}

Tensor Tensor::zeros_like(const Tensor& t) { return zeros(t.shape()); }

std::size_t Tensor::rows() const {
  if (!is_matrix()) throw ShapeMismatchError("rows(): tensor is not rank 2");
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (!is_matrix()) throw ShapeMismatchError("cols(): tensor is not rank 2");
  return shape_[1];
}

double Tensor::operator()(std::size_t r, std::size_t c) const {
  return data_[r * shape_[1] + c];
}

double& Tensor::operator()(std::size_t r, std::size_t c) {
  return data_[r * shape_[1] + c];
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw NotScalarError("item(): tensor has " + std::to_string(data_.size()) +
                         " elements");
  }
  return data_[0];
}

bool operator==(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && a.data() == b.data();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeMismatchError("matmul: inner dimensions " + shape_str(a) +
                             " x " + shape_str(b) + " do not agree");
  }
  const std::size_t n = a.rows(), m = a.cols(), p = b.cols();
  std::vector<double> out(n * p, 0.0);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = out.data() + i * p;
    for (std::size_t k = 0; k < m; ++k) {
      const double aik = ad[i * m + k];
      if (aik == 0.0) continue;
      const double* brow = bd + k * p;
      for (std::size_t j = 0; j < p; ++j) orow[j] += aik * brow[j];
    }
  }
  return Tensor({n, p}, std::move(out));
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.data());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return Tensor(a.shape(), std::move(out));
}

Tensor add_rowvec(const Tensor& m, const Tensor& row) {
  require_matrix(m, "add_rowvec");
  if (row.rank() != 1 || row.size() != m.cols()) {
    throw ShapeMismatchError("add_rowvec: vector length does not match columns");
  }
  std::vector<double> out(m.data());
  const std::size_t r = m.rows(), c = m.cols();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += row[j];
  }
  return Tensor(m.shape(), std::move(out));
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "hadamard");
  std::vector<double> out(a.data());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return Tensor(a.shape(), std::move(out));
}

Tensor concat_cols(const std::vector<const Tensor*>& parts) {
  if (parts.empty()) throw ShapeMismatchError("concat_cols: no inputs");
  const std::size_t rows = parts[0]->is_matrix()
                               ? parts[0]->rows()
                               : throw ShapeMismatchError(
                                     "concat_cols: expected rank-2 inputs");
  std::size_t total_cols = 0;
  for (const Tensor* p : parts) {
    require_matrix(*p, "concat_cols");
    if (p->rows() != rows) {
      throw ShapeMismatchError("concat_cols: row counts differ");
    }
    total_cols += p->cols();
  }
  std::vector<double> out(rows * total_cols);
  std::size_t col_base = 0;
  for (const Tensor* p : parts) {
    const std::size_t c = p->cols();
    for (std::size_t i = 0; i < rows; ++i) {
      const double* src = p->data().data() + i * c;
      std::copy(src, src + c, out.data() + i * total_cols + col_base);
    }
    col_base += c;
  }
  return Tensor({rows, total_cols}, std::move(out));
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.data());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  return Tensor(a.shape(), std::move(out));
}

Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.data());
  for (double& v : out) {
    // split on sign so exp never overflows
    v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                 : std::exp(v) / (1.0 + std::exp(v));
  }
  return Tensor(a.shape(), std::move(out));
}

Tensor clamp01(const Tensor& a) {
  std::vector<double> out(a.data());
  for (double& v : out) v = std::clamp(v, 0.0, 1.0);
  return Tensor(a.shape(), std::move(out));
}

Tensor mean_rows(const Tensor& m, const std::vector<double>& row_mask) {
  require_matrix(m, "mean_rows");
  if (!row_mask.empty() && row_mask.size() != m.rows()) {
    throw ShapeMismatchError("mean_rows: mask length does not match rows");
  }
  const std::size_t r = m.rows(), c = m.cols();
  std::vector<double> out(c, 0.0);
  double count = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    if (!row_mask.empty() && row_mask[i] == 0.0) continue;
    count += 1.0;
    for (std::size_t j = 0; j < c; ++j) out[j] += m(i, j);
  }
  if (count == 0.0) throw ShapeMismatchError("mean_rows: empty row mask");
  for (double& v : out) v /= count;
  return Tensor({1, c}, std::move(out));
}

Tensor mse(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mse");
  if (a.size() == 0) throw ShapeMismatchError("mse: empty tensors");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return Tensor::scalar(acc / static_cast<double>(a.size()));
}

Tensor transpose(const Tensor& m) {
  require_matrix(m, "transpose");
  const std::size_t r = m.rows(), c = m.cols();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = m(i, j);
  }
  return Tensor({c, r}, std::move(out));
}

Tensor row_normalize(const Tensor& m) {
  require_matrix(m, "row_normalize");
  if (m.rows() != m.cols()) {
    throw ShapeMismatchError("row_normalize: matrix is not square");
  }
  const std::size_t n = m.rows();
  std::vector<double> out(m.data());
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = out[i * n + j];
      if (v < 0.0) {
        throw Error("row_normalize: negative entry");
      }
      sum += v;
    }
    out[i * n + i] += 1.0;  // self loop
    sum += 1.0;
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= sum;
  }
  return Tensor({n, n}, std::move(out));
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.data());
  for (double& v : out) v *= c;
  return Tensor(a.shape(), std::move(out));
}

}  // namespace ratsnas
