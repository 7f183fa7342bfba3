#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace adaptkit {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_size(const Shape& shape);

// Dense row-major f64 array. Rank 1 (vectors, biases) or rank 2 (matrices,
// sequences of hidden states). Scalars are shape {1}.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data);
  explicit Tensor(Shape shape, double fill = 0.0);

  static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  // Rank 2: rows × cols. Rank 1 is treated as a single row.
  std::size_t rows() const { return rank() == 2 ? shape_[0] : 1; }
  std::size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool v) { requires_grad_ = v; }

  // Bitwise equality of shape and values (ignores requires_grad).
  bool identical(const Tensor& other) const;

 private:
  Shape shape_;
  std::vector<double> data_;
  bool requires_grad_ = false;
};

// Round every value through IEEE binary32 (the on-disk encoding width).
Tensor round_to_f32(const Tensor& t);

}  // namespace adaptkit
