#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ctxmotion/random.hpp"
#include "ctxmotion/tensor.hpp"

namespace ctxmotion {

/// Named trainable blocks in a fixed insertion order. The order defines the
/// checkpoint layout and the optimizer's iteration order.
class ParameterStore {
 public:
  ad::Tensor& add(const std::string& name, ad::Shape shape);
  /// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)).
  ad::Tensor& add_weight(const std::string& name, std::size_t fan_in, std::size_t fan_out,
                         Rng& rng);
  ad::Tensor& add_bias(const std::string& name, std::size_t width);

  bool contains(const std::string& name) const;
  const ad::Tensor& at(const std::string& name) const;
  ad::Tensor& at(const std::string& name);

  std::size_t size() const { return blocks_.size(); }
  std::size_t scalar_count() const;
  auto begin() { return blocks_.begin(); }
  auto end() { return blocks_.end(); }
  auto begin() const { return blocks_.begin(); }
  auto end() const { return blocks_.end(); }

  void zero_grad();
  void fill(double value);
  /// Deep copy; the copy does not alias this store's values.
  ParameterStore clone() const;
  /// Copies values from a store with identical names and shapes.
  void assign(const ParameterStore& other);

 private:
  std::vector<std::pair<std::string, ad::Tensor>> blocks_;
};

struct GruParams {
  ad::Tensor input_weights;   // in x 3h, gate order (reset, update, candidate)
  ad::Tensor hidden_weights;  // h x 3h
  ad::Tensor input_bias;      // 3h
  ad::Tensor hidden_bias;     // 3h

  static GruParams create(ParameterStore& store, const std::string& prefix, std::size_t input,
                          std::size_t hidden, Rng& rng);
  static GruParams bind(const ParameterStore& store, const std::string& prefix);
  std::size_t hidden_width() const { return hidden_weights.rows(); }
};

/// One GRU step for every row of `x` (rows are independent, parameters shared):
///   r = s(x Wr + br + h Ur + cr), z = s(x Wz + bz + h Uz + cz),
///   n = tanh(x Wn + bn + r * (h Un + cn)), h' = (1 - z) * n + z * h.
ad::Tensor gru_step(ad::Tape& tape, const ad::Tensor& x, const ad::Tensor& h, const GruParams& p);

struct LinearParams {
  ad::Tensor weights;  // in x out
  ad::Tensor bias;     // out, undefined when bias-free

  ad::Tensor apply(ad::Tape& tape, const ad::Tensor& x) const;
};

}  // namespace ctxmotion
