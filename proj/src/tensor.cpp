#include "ctxmotion/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "ctxmotion/errors.hpp"

namespace ctxmotion::ad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using Map = Eigen::Map<RowMatrix>;

using StoragePtr = std::shared_ptr<detail::Storage>;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) +
                         " vs " + to_string(b.shape()));
  }
}

void require_rank2(const Tensor& a, const char* op) {
  if (a.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got shape " +
                         to_string(a.shape()));
  }
}

// Splits a shape around `axis` into (outer, axis extent, inner).
struct AxisView {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis) {
  AxisView v;
  for (std::size_t d = 0; d < axis; ++d) v.outer *= shape[d];
  v.extent = shape[axis];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) v.inner *= shape[d];
  return v;
}

}  // namespace

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

void detail::Storage::accumulate(std::span<const double> g) {
  auto& buf = grad_buffer();
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g[i];
}

std::vector<double>& detail::Storage::grad_buffer() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = numel(shape);
  return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (numel(shape) != values.size()) {
    throw DimensionError("tensor of shape " + to_string(shape) + " needs " +
                         std::to_string(numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  auto s = std::make_shared<detail::Storage>();
  s->shape = std::move(shape);
  s->value = std::move(values);
  s->requires_grad = requires_grad;
  return Tensor(std::move(s));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

Tensor Tensor::identity(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return from({n, n}, std::move(v));
}

const Shape& Tensor::shape() const { return storage_->shape; }
std::size_t Tensor::size() const { return storage_->value.size(); }

std::size_t Tensor::rows() const {
  const auto& s = shape();
  return s.size() < 2 ? 1 : s[0];
}

std::size_t Tensor::cols() const {
  const auto& s = shape();
  if (s.empty()) return 1;
  return s.size() == 1 ? s[0] : size() / s[0];
}

std::span<const double> Tensor::data() const { return storage_->value; }
std::span<double> Tensor::mutable_data() { return storage_->value; }

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on tensor of shape " + to_string(shape()));
  return storage_->value[0];
}

bool Tensor::requires_grad() const { return storage_->requires_grad; }
void Tensor::set_requires_grad(bool on) { storage_->requires_grad = on; }
bool Tensor::has_grad() const { return storage_->grad.size() == storage_->value.size(); }

std::vector<double> Tensor::grad() const {
  if (!has_grad()) return std::vector<double>(size(), 0.0);
  return storage_->grad;
}

std::span<const double> Tensor::grad_data() const { return storage_->grad; }
std::span<double> Tensor::mutable_grad() { return storage_->grad_buffer(); }

void Tensor::zero_grad() { storage_->grad.clear(); }

Tensor Tensor::clone() const {
  return from(shape(), storage_->value, requires_grad());
}

Tensor Tensor::detach() const { return from(shape(), storage_->value, false); }

// ---------------------------------------------------------------------------
// Tape plumbing

Tensor Tape::make_result(Shape shape, std::vector<double> value,
                         std::initializer_list<const Tensor*> inputs) {
  bool needs = false;
  if (record_) {
    for (const Tensor* t : inputs) needs = needs || t->requires_grad();
  }
  return Tensor::from(std::move(shape), std::move(value), needs);
}

void Tape::record(std::function<void()> adjoint) { adjoints_.push_back(std::move(adjoint)); }

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " + to_string(loss.shape()));
  }
  if (loss.requires_grad()) {
    loss.storage()->grad_buffer()[0] += 1.0;
    for (auto it = adjoints_.rbegin(); it != adjoints_.rend(); ++it) (*it)();
  }
  adjoints_.clear();
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw DimensionError("matmul: inner dimensions disagree for " + to_string(a.shape()) +
                         " and " + to_string(b.shape()));
  }
  std::vector<double> out(m * n);
  Map(out.data(), m, n).noalias() = ConstMap(a.data().data(), m, k) * ConstMap(b.data().data(), k, n);
  Tensor r = make_result({m, n}, std::move(out), {&a, &b});
  if (r.requires_grad()) {
    StoragePtr sa = a.storage(), sb = b.storage(), so = r.storage();
    record([sa, sb, so, m, k, n] {
      if (so->grad.empty()) return;
      ConstMap g(so->grad.data(), m, n);
      if (sa->requires_grad) {
        Map(sa->grad_buffer().data(), m, k).noalias() += g * ConstMap(sb->value.data(), k, n).transpose();
      }
      if (sb->requires_grad) {
        Map(sb->grad_buffer().data(), k, n).noalias() += ConstMap(sa->value.data(), m, k).transpose() * g;
      }
    });
  }
  return r;
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  Tensor r = make_result(a.shape(), std::move(out), {&a, &b});
  if (r.requires_grad()) {
    StoragePtr sa = a.storage(), sb = b.storage(), so = r.storage();
    record([sa, sb, so] {
      if (so->grad.empty()) return;
      if (sa->requires_grad) sa->accumulate(so->grad);
      if (sb->requires_grad) sb->accumulate(so->grad);
    });
  }
  return r;
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  Tensor r = make_result(a.shape(), std::move(out), {&a, &b});
  if (r.requires_grad()) {
    StoragePtr sa = a.storage(), sb = b.storage(), so = r.storage();
    record([sa, sb, so] {
      if (so->grad.empty()) return;
      if (sa->requires_grad) sa->accumulate(so->grad);
      if (sb->requires_grad) {
        auto& gb = sb->grad_buffer();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= so->grad[i];
      }
    });
  }
  return r;
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  Tensor r = make_result(a.shape(), std::move(out), {&a, &b});
  if (r.requires_grad()) {
    StoragePtr sa = a.storage(), sb = b.storage(), so = r.storage();
    record([sa, sb, so] {
      if (so->grad.empty()) return;
      const auto& g = so->grad;
      if (sa->requires_grad) {
        auto& ga = sa->grad_buffer();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * sb->value[i];
      }
      if (sb->requires_grad) {
        auto& gb = sb->grad_buffer();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * sa->value[i];
      }
    });
  }
  return r;
}

Tensor Tape::add_bias(const Tensor& x, const Tensor& bias) {
  require_rank2(x, "add_bias");
  const std::size_t m = x.rows(), n = x.cols();
  const bool ok = (bias.rank() == 1 && bias.shape()[0] == n) ||
                  (bias.rank() == 2 && bias.shape()[0] == 1 && bias.shape()[1] == n);
  if (!ok) {
    throw DimensionError("add_bias: bias " + to_string(bias.shape()) + " does not fit " +
                         to_string(x.shape()));
  }
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x[i * n + j] + bias[j];
  Tensor r = make_result(x.shape(), std::move(out), {&x, &bias});
  if (r.requires_grad()) {
    StoragePtr sx = x.storage(), sb = bias.storage(), so = r.storage();
    record([sx, sb, so, m, n] {
      if (so->grad.empty()) return;
      if (sx->requires_grad) sx->accumulate(so->grad);
      if (sb->requires_grad) {
        auto& gb = sb->grad_buffer();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) gb[j] += so->grad[i * n + j];
      }
    });
  }
  return r;
}

Tensor Tape::scale(const Tensor& x, double factor) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  Tensor r = make_result(x.shape(), std::move(out), {&x});
  if (r.requires_grad()) {
    StoragePtr sx = x.storage(), so = r.storage();
    record([sx, so, factor] {
      if (so->grad.empty()) return;
      auto& gx = sx->grad_buffer();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += so->grad[i] * factor;
    });
  }
  return r;
}

Tensor Tape::pointwise(const Tensor& x, std::vector<double> out, double (*deriv)(double, double)) {
  Tensor r = make_result(x.shape(), std::move(out), {&x});
  if (r.requires_grad()) {
    StoragePtr sx = x.storage(), so = r.storage();
    record([sx, so, deriv] {
      if (so->grad.empty()) return;
      auto& gx = sx->grad_buffer();
      for (std::size_t i = 0; i < gx.size(); ++i)
        gx[i] += so->grad[i] * deriv(sx->value[i], so->value[i]);
    });
  }
  return r;
}

Tensor Tape::sigmoid(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-x[i]));
  return pointwise(x, std::move(out), [](double, double y) { return y * (1.0 - y); });
}

Tensor Tape::tanh(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x[i]);
  return pointwise(x, std::move(out), [](double, double y) { return 1.0 - y * y; });
}

Tensor Tape::relu(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  return pointwise(x, std::move(out), [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor Tape::activate(const Tensor& x, Activation act) {
  switch (act) {
    case Activation::Identity: return x;
    case Activation::Relu: return relu(x);
    case Activation::Sigmoid: return sigmoid(x);
    case Activation::Tanh: return tanh(x);
  }
  return x;
}

Tensor Tape::square(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * x[i];
  return pointwise(x, std::move(out), [](double v, double) { return 2.0 * v; });
}

Tensor Tape::sqrt(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(x[i]);
  return pointwise(x, std::move(out), [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

// ---------------------------------------------------------------------------
// Reductions

Tensor Tape::sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  Tensor r = make_result({}, {total}, {&x});
  if (r.requires_grad()) {
    StoragePtr sx = x.storage(), so = r.storage();
    record([sx, so] {
      if (so->grad.empty()) return;
      const double g = so->grad[0];
      for (double& v : sx->grad_buffer()) v += g;
    });
  }
  return r;
}

Tensor Tape::softmax_rows(const Tensor& logits) {
  require_rank2(logits, "softmax_rows");
  const std::size_t m = logits.rows(), n = logits.cols();
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = logits.data().data() + i * n;
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::isfinite(row[j])) {
        throw NumericError("softmax_rows: non-finite logit at (" + std::to_string(i) + ", " +
                           std::to_string(j) + ")");
      }
      peak = std::max(peak, row[j]);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = std::exp(row[j] - peak);
      total += out[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= total;
  }
  Tensor r = make_result(logits.shape(), std::move(out), {&logits});
  if (r.requires_grad()) {
    StoragePtr sx = logits.storage(), so = r.storage();
    record([sx, so, m, n] {
      if (so->grad.empty()) return;
      auto& gx = sx->grad_buffer();
      for (std::size_t i = 0; i < m; ++i) {
        const double* y = so->value.data() + i * n;
        const double* g = so->grad.data() + i * n;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += g[j] * y[j];
        for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += y[j] * (g[j] - dot);
      }
    });
  }
  return r;
}

Tensor Tape::min_over_rows(const Tensor& x) { return extreme_over_rows(x, false); }
Tensor Tape::max_over_rows(const Tensor& x) { return extreme_over_rows(x, true); }

Tensor Tape::extreme_over_rows(const Tensor& x, bool take_max) {
  require_rank2(x, take_max ? "max_over_rows" : "min_over_rows");
  const std::size_t m = x.rows(), n = x.cols();
  if (m == 0) throw DimensionError("min/max over zero rows");
  std::vector<double> out(n);
  std::vector<std::size_t> arg(n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = x[j];
    for (std::size_t i = 1; i < m; ++i) {
      const double v = x[i * n + j];
      if (take_max ? v > out[j] : v < out[j]) {
        out[j] = v;
        arg[j] = i;
      }
    }
  }
  Tensor r = make_result({1, n}, std::move(out), {&x});
  if (r.requires_grad()) {
    StoragePtr sx = x.storage(), so = r.storage();
    record([sx, so, arg = std::move(arg), n] {
      if (so->grad.empty()) return;
      auto& gx = sx->grad_buffer();
      for (std::size_t j = 0; j < n; ++j) gx[arg[j] * n + j] += so->grad[j];
    });
  }
  return r;
}

// ---------------------------------------------------------------------------
// Structural

Tensor Tape::concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) {
    throw DimensionError("concat: axis " + std::to_string(axis) + " out of range for shape " +
                         to_string(first));
  }
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    bool compatible = s.size() == first.size();
    for (std::size_t d = 0; compatible && d < s.size(); ++d) {
      if (d != axis && s[d] != first[d]) compatible = false;
    }
    if (!compatible) {
      throw DimensionError("concat: incompatible shapes " + to_string(first) + " and " +
                           to_string(s) + " along axis " + std::to_string(axis));
    }
    out_shape[axis] += s[axis];
  }
  const AxisView ov = axis_view(out_shape, axis);
  std::vector<double> out(numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  bool needs = false;
  for (const Tensor& p : parts) {
    const AxisView pv = axis_view(p.shape(), axis);
    const std::size_t block = pv.extent * pv.inner;
    for (std::size_t o = 0; o < pv.outer; ++o) {
      std::copy_n(p.data().data() + o * block, block,
                  out.data() + o * ov.extent * ov.inner + offset * ov.inner);
    }
    offsets.push_back(offset);
    offset += pv.extent;
    needs = needs || p.requires_grad();
  }
  Tensor r = Tensor::from(out_shape, std::move(out), record_ && needs);
  if (r.requires_grad()) {
    std::vector<StoragePtr> sources;
    for (const Tensor& p : parts) sources.push_back(p.storage());
    StoragePtr so = r.storage();
    record([sources = std::move(sources), offsets = std::move(offsets), so, axis, ov] {
      if (so->grad.empty()) return;
      for (std::size_t k = 0; k < sources.size(); ++k) {
        const auto& src = sources[k];
        if (!src->requires_grad) continue;
        const AxisView pv = axis_view(src->shape, axis);
        const std::size_t block = pv.extent * pv.inner;
        auto& g = src->grad_buffer();
        for (std::size_t o = 0; o < pv.outer; ++o) {
          const double* from = so->grad.data() + o * ov.extent * ov.inner + offsets[k] * ov.inner;
          double* to = g.data() + o * block;
          for (std::size_t e = 0; e < block; ++e) to[e] += from[e];
        }
      }
    });
  }
  return r;
}

Tensor Tape::slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  if (axis >= x.rank()) {
    throw DimensionError("slice: axis " + std::to_string(axis) + " out of range for shape " +
                         to_string(x.shape()));
  }
  if (begin > end || end > x.shape()[axis]) {
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of bounds for shape " + to_string(x.shape()));
  }
  const AxisView xv = axis_view(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  const std::size_t block = (end - begin) * xv.inner;
  std::vector<double> out(xv.outer * block);
  for (std::size_t o = 0; o < xv.outer; ++o) {
    std::copy_n(x.data().data() + o * xv.extent * xv.inner + begin * xv.inner, block,
                out.data() + o * block);
  }
  Tensor r = make_result(std::move(out_shape), std::move(out), {&x});
  if (r.requires_grad()) {
    StoragePtr sx = x.storage(), so = r.storage();
    record([sx, so, xv, begin, block] {
      if (so->grad.empty()) return;
      auto& g = sx->grad_buffer();
      for (std::size_t o = 0; o < xv.outer; ++o) {
        double* to = g.data() + o * xv.extent * xv.inner + begin * xv.inner;
        const double* from = so->grad.data() + o * block;
        for (std::size_t e = 0; e < block; ++e) to[e] += from[e];
      }
    });
  }
  return r;
}

Tensor Tape::gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  require_rank2(x, "gather_rows");
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(rows.size() * n);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= m) {
      throw DimensionError("gather_rows: row " + std::to_string(rows[k]) + " out of range for " +
                           to_string(x.shape()));
    }
    std::copy_n(x.data().data() + rows[k] * n, n, out.data() + k * n);
  }
  Tensor r = make_result({rows.size(), n}, std::move(out), {&x});
  if (r.requires_grad()) {
    StoragePtr sx = x.storage(), so = r.storage();
    record([sx, so, idx = std::vector<std::size_t>(rows.begin(), rows.end()), n] {
      if (so->grad.empty()) return;
      auto& g = sx->grad_buffer();
      for (std::size_t k = 0; k < idx.size(); ++k)
        for (std::size_t j = 0; j < n; ++j) g[idx[k] * n + j] += so->grad[k * n + j];
    });
  }
  return r;
}

Tensor Tape::reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + to_string(x.shape()) + " as " +
                         to_string(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  Tensor r = make_result(std::move(shape), std::move(out), {&x});
  if (r.requires_grad()) {
    StoragePtr sx = x.storage(), so = r.storage();
    record([sx, so] {
      if (so->grad.empty()) return;
      sx->accumulate(so->grad);
    });
  }
  return r;
}

}  // namespace ctxmotion::ad
