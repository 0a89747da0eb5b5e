#include "skillab/numkit/mlp.hpp"

#include <cmath>

namespace skillab::numkit {

Mlp::Mlp(std::vector<std::size_t> widths, Rng& rng) : widths_(std::move(widths)) {
  if (widths_.size() < 2) throw DimensionError("Mlp: need at least input and output widths");
  for (std::size_t w : widths_)
    if (w == 0) throw DimensionError("Mlp: layer widths must be positive");
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const std::size_t in = widths_[l], out = widths_[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    Tensor w({in, out});
    for (double& x : w.data()) x = rng.uniform(-limit, limit);
    weights_.emplace_back(std::move(w));
    biases_.emplace_back(Tensor({1, out}));
  }
}

void Mlp::check_input(const Tensor& input) const {
  if (input.rank() != 2 || input.cols() != in_width()) {
    throw DimensionError("Mlp: input " + to_string(input.shape()) + " does not match input width " +
                         std::to_string(in_width()));
  }
}

Var Mlp::forward(const Var& input, ParamMode mode) {
  check_input(input.value());
  Var h = input;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const Var w = mode == ParamMode::kTrack ? leaf(weights_[l]) : constant(weights_[l].value);
    const Var b = mode == ParamMode::kTrack ? leaf(biases_[l]) : constant(biases_[l].value);
    h = matmul(h, w) + b;
    if (l + 1 < weights_.size()) h = relu(h);
  }
  return h;
}

Tensor Mlp::eval(const Tensor& input) const {
  check_input(input);
  Tensor h = input;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Tensor next = matmul(h, weights_[l].value);
    const std::size_t n = next.rows(), m = next.cols();
    const bool hidden = l + 1 < weights_.size();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        double v = next(i, j) + biases_[l].value[j];
        next(i, j) = hidden ? relu(v) : v;
      }
    h = std::move(next);
  }
  return h;
}

std::vector<Parameter*> Mlp::parameters() {
  std::vector<Parameter*> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

std::vector<const Parameter*> Mlp::parameters() const {
  std::vector<const Parameter*> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

void Mlp::set_trainable(bool trainable) {
  for (Parameter* p : parameters()) p->trainable = trainable;
}

void Mlp::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

std::size_t parameter_count(const std::vector<Parameter*>& params) {
  std::size_t n = 0;
  for (const Parameter* p : params) n += p->value.size();
  return n;
}

}  // namespace skillab::numkit
