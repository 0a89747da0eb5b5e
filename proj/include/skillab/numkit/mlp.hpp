#pragma once

#include <vector>

#include "skillab/numkit/autodiff.hpp"
#include "skillab/numkit/random.hpp"

namespace skillab::numkit {

/// How a forward pass treats the network's own parameters.
enum class ParamMode {
  kTrack,     // parameters are graph leaves and receive gradients
  kConstant,  // parameters enter as constants; gradients still flow to the input
};

/**
 * Fully connected network: rectifier on hidden layers, identity on the output.
 * `widths` lists every layer width including input and output, so {4, 8, 3}
 * is one hidden layer of 8 units. Two entries give a single affine map.
 */
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<std::size_t> widths, Rng& rng);

  Var forward(const Var& input, ParamMode mode = ParamMode::kTrack);
  /// Untaped evaluation.
  Tensor eval(const Tensor& input) const;

  std::size_t in_width() const { return widths_.front(); }
  std::size_t out_width() const { return widths_.back(); }
  const std::vector<std::size_t>& widths() const { return widths_; }
  std::size_t num_layers() const { return weights_.size(); }

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  void set_trainable(bool trainable);
  void zero_grad();

  Parameter& weight(std::size_t layer) { return weights_.at(layer); }
  Parameter& bias(std::size_t layer) { return biases_.at(layer); }
  const Parameter& weight(std::size_t layer) const { return weights_.at(layer); }
  const Parameter& bias(std::size_t layer) const { return biases_.at(layer); }

 private:
  void check_input(const Tensor& input) const;

  std::vector<std::size_t> widths_;
  std::vector<Parameter> weights_;  // in x out
  std::vector<Parameter> biases_;   // 1 x out
};

/// Total number of scalars across parameters.
std::size_t parameter_count(const std::vector<Parameter*>& params);

}  // namespace skillab::numkit
