#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace decodet {

/// Dense row-major tensor of 64-bit floats. All module-level math runs in
/// double precision; 32-bit floats appear only in serialized files.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

  Tensor(std::vector<std::size_t> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (count(shape_) != data_.size()) {
      throw std::invalid_argument("tensor: shape/data mismatch: shape holds " +
                                  std::to_string(count(shape_)) +
                                  " elements, data holds " +
                                  std::to_string(data_.size()));
    }
  }

  static Tensor zeros(std::vector<std::size_t> shape) {
    return Tensor(std::move(shape));
  }

  static Tensor full(std::vector<std::size_t> shape, double v) {
    Tensor t(std::move(shape));
    for (double& x : t.data_) x = v;
    return t;
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Rank-specific accessors; hot kernels index raw pointers instead.
  double& at3(std::size_t c, std::size_t h, std::size_t w) {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }
  double at3(std::size_t c, std::size_t h, std::size_t w) const {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }
  double& at2(std::size_t i, std::size_t j) {
    return data_[i * shape_[1] + j];
  }
  double at2(std::size_t i, std::size_t j) const {
    return data_[i * shape_[1] + j];
  }
  double& at4(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
    return data_[((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }
  double at4(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
    return data_[((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const;

  /// "[2, 3, 4]" — used in diagnostics.
  std::string shape_str() const;

  static std::size_t count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

/// Parameter value paired with a gradient of identical shape.
struct GradPair {
  Tensor value;
  Tensor gradient;
};

void check_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace decodet
