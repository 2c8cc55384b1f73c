#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dmt {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major f64 array. Optionally carries a gradient buffer of the same
/// length, filled by Tape::backward for tensors bound as parameters.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double value);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double at(std::size_t i) const { return data_.at(i); }

  bool requires_grad() const noexcept { return requires_grad_; }
  void set_requires_grad(bool on) noexcept { requires_grad_ = on; }

  bool has_grad() const noexcept { return grad_.has_value(); }
  /// Precondition: has_grad().
  std::span<const double> grad() const { return *grad_; }
  std::span<double> grad() { return *grad_; }
  /// Allocates a zeroed gradient buffer if none exists and returns it.
  std::span<double> ensure_grad();
  void clear_grad() noexcept { grad_.reset(); }

  Tensor reshaped(Shape shape) const;
  /// Slice of the leading axis: rows [begin, begin + count).
  Tensor slice_leading(std::size_t begin, std::size_t count) const;

  bool all_finite() const noexcept;

  friend bool operator==(const Tensor& a, const Tensor& b) noexcept {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
  bool requires_grad_ = false;
  std::optional<std::vector<double>> grad_;
};

// Value-level arithmetic, no gradient tracking. Shapes must be identical.
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(double s, const Tensor& a);
Tensor operator*(const Tensor& a, double s);

/// alpha * a + beta * b
Tensor axpby(double alpha, const Tensor& a, double beta, const Tensor& b);

void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

double sum(const Tensor& a);
double squared_norm(const Tensor& a);
double norm(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);

/// Stacks equally shaped tensors along a new leading axis.
Tensor stack(std::span<const Tensor> items);
/// Inverse of stack: splits the leading axis.
std::vector<Tensor> unstack(const Tensor& batch);

}  // namespace dmt
