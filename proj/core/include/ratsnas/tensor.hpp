#pragma once

#include <cstddef>
#include <vector>

namespace ratsnas {

// Dense row-major tensor of doubles. Ranks 0 (scalar), 1 (vector) and 2
// (matrix) are used. Values are checked for NaN/Inf on construction; every
// kernel result goes through the same check, so non-finite intermediates are
// rejected as soon as they appear.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor vector(std::vector<double> v);
  static Tensor matrix(std::size_t rows, std::size_t cols);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> data);
  static Tensor zeros(const std::vector<std::size_t>& shape);
  static Tensor zeros_like(const Tensor& t);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  bool is_matrix() const { return rank() == 2; }
  std::size_t rows() const;
  std::size_t cols() const;

  double operator()(std::size_t r, std::size_t c) const;
  double& operator()(std::size_t r, std::size_t c);
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  // value of a single-element tensor; NotScalarError otherwise
  double item() const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

bool operator==(const Tensor& a, const Tensor& b);

// ---- primitives (value semantics; each validates shapes and finiteness) ----

// (n x m) * (m x p) -> (n x p)
Tensor matmul(const Tensor& a, const Tensor& b);
// element-wise, same shape
Tensor add(const Tensor& a, const Tensor& b);
// adds a length-m vector to every row of an (n x m) matrix
Tensor add_rowvec(const Tensor& m, const Tensor& row);
// element-wise product, same shape
Tensor hadamard(const Tensor& a, const Tensor& b);
// concatenation along the last axis; all parts rank 2 with equal row counts
Tensor concat_cols(const std::vector<const Tensor*>& parts);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor clamp01(const Tensor& a);
// column means over rows with mask != 0 (empty mask = all rows); (n x m) -> (1 x m)
Tensor mean_rows(const Tensor& m, const std::vector<double>& row_mask = {});
// mean squared error over all elements -> rank-0 scalar
Tensor mse(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& m);
// D^-1 (M + I) for a square matrix with non-negative entries, where D is the
// diagonal of row sums of (M + I); every output row sums to 1
Tensor row_normalize(const Tensor& m);
Tensor scale(const Tensor& a, double c);

}  // namespace ratsnas
