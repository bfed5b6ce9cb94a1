#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lars/autodiff.hpp"
#include "lars/params.hpp"
#include "lars/rng.hpp"

namespace lars {

enum class HiddenActivation { kTanh, kRelu };
enum class OutputActivation { kIdentity, kLogistic };

struct MlpSpec {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden;
  std::size_t output_dim = 1;
  HiddenActivation hidden_activation = HiddenActivation::kTanh;
  OutputActivation output_activation = OutputActivation::kIdentity;

  std::size_t layer_count() const { return hidden.size() + 1; }
  // Width of layer l's input and output.
  std::size_t fan_in(std::size_t layer) const { return layer == 0 ? input_dim : hidden[layer - 1]; }
  std::size_t fan_out(std::size_t layer) const { return layer == hidden.size() ? output_dim : hidden[layer]; }
  void validate() const;
};

// Multi-layer perceptron whose weights live in a ParamStore under
// "<prefix>.w<l>" (fan_in x fan_out) and "<prefix>.b<l>" (fan_out).
class Mlp {
 public:
  Mlp() = default;
  Mlp(MlpSpec spec, std::string prefix);

  const MlpSpec& spec() const { return spec_; }
  const std::string& prefix() const { return prefix_; }
  std::string weight_name(std::size_t layer) const { return prefix_ + ".w" + std::to_string(layer); }
  std::string bias_name(std::size_t layer) const { return prefix_ + ".b" + std::to_string(layer); }

  // Adds this network's entries to `store` with Glorot-uniform weights and
  // zero biases.
  void init(ParamStore& store, Rng& rng) const;

  // Output before the output activation.
  Var preactivation(Tape& tape, Var input) const;
  Var forward(Tape& tape, Var input) const;

 private:
  MlpSpec spec_;
  std::string prefix_;
};

// Standalone parameter store for `spec` under prefix "mlp", deterministic in seed.
ParamStore glorot_init(const MlpSpec& spec, std::uint64_t seed);

// Batched evaluation without recording gradients.
Matrix mlp_forward(const ParamStore& params, const Mlp& net, const Matrix& input);

}  // namespace lars
