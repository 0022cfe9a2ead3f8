#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ctxmotion::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {
struct Storage {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;

  void accumulate(std::span<const double> g);
  std::vector<double>& grad_buffer();
};
}  // namespace detail

/// Dense row-major array of doubles. Copies share storage, like a handle;
/// use `clone()` for an independent copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor identity(std::size_t n);

  bool defined() const { return static_cast<bool>(storage_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  /// Rows/cols of the 2-D view: rank 0 is 1x1, rank 1 {n} is 1xn.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double operator[](std::size_t i) const { return data()[i]; }
  double at(std::size_t r, std::size_t c) const { return data()[r * cols() + c]; }
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  /// Gradient after backward; zeros when nothing flowed into this tensor.
  std::vector<double> grad() const;
  /// Raw gradient buffer; empty when nothing has been accumulated.
  std::span<const double> grad_data() const;
  /// Gradient buffer, allocated as zeros if absent.
  std::span<double> mutable_grad();
  void zero_grad();

  Tensor clone() const;
  Tensor detach() const;

  const std::shared_ptr<detail::Storage>& storage() const { return storage_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Storage> s) : storage_(std::move(s)) {}
  std::shared_ptr<detail::Storage> storage_;

  friend class Tape;
};

enum class Activation { Identity, Relu, Sigmoid, Tanh };

/// Records operations in execution order and replays their adjoints in
/// reverse on `backward`. A tape built with `record = false` only evaluates.
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }
  std::size_t size() const { return adjoints_.size(); }

  Tensor matmul(const Tensor& a, const Tensor& b);

  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  /// x[m x n] + bias broadcast over rows; bias is {n} or {1, n}.
  Tensor add_bias(const Tensor& x, const Tensor& bias);
  Tensor scale(const Tensor& x, double factor);

  Tensor sigmoid(const Tensor& x);
  Tensor tanh(const Tensor& x);
  Tensor relu(const Tensor& x);
  Tensor activate(const Tensor& x, Activation act);
  Tensor square(const Tensor& x);
  /// Adjoint is taken as 0 at x = 0.
  Tensor sqrt(const Tensor& x);

  Tensor sum(const Tensor& x);
  /// Row-wise softmax with max subtraction. Throws NumericError on non-finite input.
  Tensor softmax_rows(const Tensor& logits);

  Tensor concat(std::span<const Tensor> parts, std::size_t axis);
  Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
    return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
  }
  /// Elements [begin, end) along `axis`.
  Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);
  /// Rows of a 2-D tensor selected by index (repeats allowed).
  Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);
  Tensor reshape(const Tensor& x, Shape shape);
  /// Column-wise min/max of a 2-D tensor, shape {1, cols}.
  Tensor min_over_rows(const Tensor& x);
  Tensor max_over_rows(const Tensor& x);

  /// Reverse sweep from a scalar loss. Gradients accumulate into every
  /// participating tensor with requires_grad; the tape is cleared afterwards.
  void backward(const Tensor& loss);
  void clear() { adjoints_.clear(); }

 private:
  Tensor make_result(Shape shape, std::vector<double> value,
                     std::initializer_list<const Tensor*> inputs);
  void record(std::function<void()> adjoint);
  Tensor pointwise(const Tensor& x, std::vector<double> out, double (*deriv)(double, double));
  Tensor extreme_over_rows(const Tensor& x, bool take_max);

  bool record_;
  std::vector<std::function<void()>> adjoints_;
};

}  // namespace ctxmotion::ad
