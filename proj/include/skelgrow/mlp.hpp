#pragma once

#include <random>
#include <span>
#include <vector>

namespace skelgrow {

/// Fully connected ReLU network: `depth` hidden layers of `width` units
/// followed by a linear output layer. Parameters live in external storage
/// (layout: [W0, b0, W1, b1, ...], weights row-major out x in) so an
/// optimizer can treat several networks as one flat array.
class Mlp {
 public:
  Mlp() = default;
  Mlp(int input, int output, int width, int depth);

  int input_size() const { return input_; }
  int output_size() const { return output_; }
  int param_count() const;

  /// Hidden layers get He-uniform weights; the last layer is drawn
  /// uniformly from [-last_layer_scale, last_layer_scale] so the network
  /// starts near zero output. Biases start at zero.
  void init_params(std::span<double> params, std::mt19937_64& rng,
                   double last_layer_scale) const;

  void forward(std::span<const double> params, std::span<const double> input,
               std::span<double> output) const;

  /// Activation record for one forward pass, reusable across calls.
  struct Trace {
    std::vector<double> acts;  // concatenated post-activations incl. input
  };

  void forward(std::span<const double> params, std::span<const double> input,
               std::span<double> output, Trace& trace) const;

  /// Accumulates dL/dparams given dL/doutput for the traced pass.
  void backward(std::span<const double> params, const Trace& trace,
                std::span<const double> d_output, std::span<double> d_params) const;

 private:
  struct LayerShape {
    int in = 0;
    int out = 0;
    int weight_offset = 0;
    int bias_offset = 0;
  };
  const std::vector<LayerShape>& layers() const { return layers_; }

  int input_ = 0;
  int output_ = 0;
  int width_ = 0;
  int depth_ = 0;
  int param_count_ = 0;
  std::vector<LayerShape> layers_;
  std::vector<int> act_offsets_;  // offsets of a_0..a_L in Trace::acts
  int act_total_ = 0;
};

}  // namespace skelgrow
