#include "ctxmotion/layers.hpp"

#include <algorithm>
#include <cmath>

#include "ctxmotion/errors.hpp"

namespace ctxmotion {

ad::Tensor& ParameterStore::add(const std::string& name, ad::Shape shape) {
  if (contains(name)) throw ContractError("duplicate parameter block '" + name + "'");
  blocks_.emplace_back(name, ad::Tensor::zeros(std::move(shape), true));
  return blocks_.back().second;
}

ad::Tensor& ParameterStore::add_weight(const std::string& name, std::size_t fan_in,
                                       std::size_t fan_out, Rng& rng) {
  ad::Tensor& w = add(name, {fan_in, fan_out});
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : w.mutable_data()) v = rng.uniform(-limit, limit);
  return w;
}

ad::Tensor& ParameterStore::add_bias(const std::string& name, std::size_t width) {
  return add(name, {width});
}

bool ParameterStore::contains(const std::string& name) const {
  return std::any_of(blocks_.begin(), blocks_.end(),
                     [&](const auto& b) { return b.first == name; });
}

const ad::Tensor& ParameterStore::at(const std::string& name) const {
  for (const auto& [n, t] : blocks_)
    if (n == name) return t;
  throw ContractError("missing parameter block '" + name + "'");
}

ad::Tensor& ParameterStore::at(const std::string& name) {
  for (auto& [n, t] : blocks_)
    if (n == name) return t;
  throw ContractError("missing parameter block '" + name + "'");
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t total = 0;
  for (const auto& [n, t] : blocks_) total += t.size();
  return total;
}

void ParameterStore::zero_grad() {
  for (auto& [n, t] : blocks_) t.zero_grad();
}

void ParameterStore::fill(double value) {
  for (auto& [n, t] : blocks_) std::fill(t.mutable_data().begin(), t.mutable_data().end(), value);
}

ParameterStore ParameterStore::clone() const {
  ParameterStore copy;
  for (const auto& [n, t] : blocks_) copy.blocks_.emplace_back(n, t.clone());
  return copy;
}

void ParameterStore::assign(const ParameterStore& other) {
  if (other.size() != size()) throw ContractError("parameter stores differ in block count");
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    auto& [name, dst] = blocks_[i];
    const auto& [oname, src] = other.blocks_[i];
    if (name != oname || dst.shape() != src.shape()) {
      throw ContractError("parameter block mismatch at '" + name + "'");
    }
    std::copy(src.data().begin(), src.data().end(), dst.mutable_data().begin());
  }
}

GruParams GruParams::create(ParameterStore& store, const std::string& prefix, std::size_t input,
                            std::size_t hidden, Rng& rng) {
  store.add_weight(prefix + ".input_weights", input, 3 * hidden, rng);
  store.add_weight(prefix + ".hidden_weights", hidden, 3 * hidden, rng);
  store.add_bias(prefix + ".input_bias", 3 * hidden);
  store.add_bias(prefix + ".hidden_bias", 3 * hidden);
  return bind(store, prefix);
}

GruParams GruParams::bind(const ParameterStore& store, const std::string& prefix) {
  return {store.at(prefix + ".input_weights"), store.at(prefix + ".hidden_weights"),
          store.at(prefix + ".input_bias"), store.at(prefix + ".hidden_bias")};
}

ad::Tensor gru_step(ad::Tape& tape, const ad::Tensor& x, const ad::Tensor& h, const GruParams& p) {
  const std::size_t width = p.hidden_width();
  if (h.rank() != 2 || h.cols() != width || x.rank() != 2 || x.rows() != h.rows() ||
      x.cols() != p.input_weights.rows()) {
    throw DimensionError("gru_step: input " + ad::to_string(x.shape()) + " / hidden " +
                         ad::to_string(h.shape()) + " do not fit a cell with input width " +
                         std::to_string(p.input_weights.rows()) + " and hidden width " +
                         std::to_string(width));
  }
  const ad::Tensor gx = tape.add_bias(tape.matmul(x, p.input_weights), p.input_bias);
  const ad::Tensor gh = tape.add_bias(tape.matmul(h, p.hidden_weights), p.hidden_bias);
  const auto gate = [&](const ad::Tensor& g, std::size_t k) {
    return tape.slice(g, 1, k * width, (k + 1) * width);
  };
  const ad::Tensor reset = tape.sigmoid(tape.add(gate(gx, 0), gate(gh, 0)));
  const ad::Tensor update = tape.sigmoid(tape.add(gate(gx, 1), gate(gh, 1)));
  const ad::Tensor candidate = tape.tanh(tape.add(gate(gx, 2), tape.mul(reset, gate(gh, 2))));
  // (1 - z) * n + z * h == n + z * (h - n)
  return tape.add(candidate, tape.mul(update, tape.sub(h, candidate)));
}

ad::Tensor LinearParams::apply(ad::Tape& tape, const ad::Tensor& x) const {
  ad::Tensor y = tape.matmul(x, weights);
  return bias.defined() ? tape.add_bias(y, bias) : y;
}

}  // namespace ctxmotion
