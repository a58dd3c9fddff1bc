#ifndef GLOM_TENSOR_HPP
#define GLOM_TENSOR_HPP

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "glom/error.hpp"
#include "glom/random.hpp"

namespace glom {

// Dense row-major N-d array of doubles. Plain value type: copying copies the
// buffer. Gradient participation is tracked by the tape (autodiff.hpp); the
// requires_grad flag here only marks leaves that want a gradient.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(check_shape(shape_), 0.0);
  }

  Tensor(std::vector<int> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (check_shape(shape_) != data_.size())
      throw DimensionError("tensor: shape " + shape_str() + " wants " +
                           std::to_string(numel_of(shape_)) +
                           " values, got " + std::to_string(data_.size()));
  }

  static Tensor full(std::vector<int> shape, double value) {
    Tensor t(std::move(shape));
    for (auto& v : t.data_) v = value;
    return t;
  }

  static Tensor scalar(double value) { return Tensor({1}, {value}); }

  // Fan-in-scaled uniform init: U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
  static Tensor uniform_fan_in(std::vector<int> shape, int fan_in, Rng& rng) {
    Tensor t(std::move(shape));
    double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (auto& v : t.data_) v = rng.uniform(-limit, limit);
    return t;
  }

  const std::vector<int>& shape() const { return shape_; }
  int dim(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::size_t size() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Row-major element access for the ranks the layers use.
  double& at(int i) { return data_[idx({i})]; }
  double& at(int i, int j) { return data_[idx({i, j})]; }
  double& at(int i, int j, int k) { return data_[idx({i, j, k})]; }
  double& at(int i, int j, int k, int l) { return data_[idx({i, j, k, l})]; }
  double at(int i) const { return data_[idx({i})]; }
  double at(int i, int j) const { return data_[idx({i, j})]; }
  double at(int i, int j, int k) const { return data_[idx({i, j, k})]; }
  double at(int i, int j, int k, int l) const { return data_[idx({i, j, k, l})]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  std::string shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape_.size(); ++i)
      os << shape_[i] << (i + 1 < shape_.size() ? "," : "");
    os << ']';
    return os.str();
  }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void throw_if_not_finite(const std::string& what) const {
    if (!all_finite()) throw NumericError(what + ": non-finite value");
  }

  bool requires_grad = false;
  // Populated by Graph::backward for leaves; same shape as data.
  std::vector<double> grad;

 private:
  static std::size_t numel_of(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
  }

  static std::size_t check_shape(const std::vector<int>& shape) {
    for (int d : shape)
      if (d <= 0) throw DimensionError("tensor: non-positive dimension");
    return numel_of(shape);
  }

  std::size_t idx(std::initializer_list<int> ix) const {
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (int i : ix) flat = flat * static_cast<std::size_t>(shape_[axis++]) +
                            static_cast<std::size_t>(i);
    return flat;
  }

  std::vector<int> shape_;
  std::vector<double> data_;
};

inline bool operator==(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && a.values() == b.values();
}

}  // namespace glom

#endif  // GLOM_TENSOR_HPP
