#include "skelgrow/mlp.hpp"

#include <cmath>

#include "skelgrow/errors.hpp"

namespace skelgrow {

Mlp::Mlp(int input, int output, int width, int depth)
    : input_(input), output_(output), width_(width), depth_(depth) {
  if (input < 1 || output < 1 || depth < 0 || (depth > 0 && width < 1)) {
    throw ValidationError("Mlp: invalid shape");
  }
  int offset = 0;
  int in = input;
  const int layer_count = depth + 1;
  for (int l = 0; l < layer_count; ++l) {
    const int out = (l == depth) ? output : width;
    LayerShape shape;
    shape.in = in;
    shape.out = out;
    shape.weight_offset = offset;
    offset += in * out;
    shape.bias_offset = offset;
    offset += out;
    layers_.push_back(shape);
    in = out;
  }
  param_count_ = offset;

  act_offsets_.resize(layers_.size() + 1);
  act_offsets_[0] = 0;
  int acc = input;
  for (size_t l = 0; l < layers_.size(); ++l) {
    act_offsets_[l + 1] = acc;
    acc += layers_[l].out;
  }
  act_total_ = acc;
}

int Mlp::param_count() const { return param_count_; }

void Mlp::init_params(std::span<double> params, std::mt19937_64& rng,
                      double last_layer_scale) const {
  if (params.size() != static_cast<size_t>(param_count_)) {
    throw ValidationError("Mlp::init_params: storage size mismatch");
  }
  for (size_t l = 0; l < layers_.size(); ++l) {
    const LayerShape& shape = layers_[l];
    const bool last = (l + 1 == layers_.size());
    const double bound = last ? last_layer_scale : std::sqrt(6.0 / shape.in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (int i = 0; i < shape.in * shape.out; ++i) {
      params[shape.weight_offset + i] = dist(rng);
    }
    for (int i = 0; i < shape.out; ++i) params[shape.bias_offset + i] = 0.0;
  }
}

void Mlp::forward(std::span<const double> params, std::span<const double> input,
                  std::span<double> output) const {
  Trace trace;
  forward(params, input, output, trace);
}

void Mlp::forward(std::span<const double> params, std::span<const double> input,
                  std::span<double> output, Trace& trace) const {
  if (input.size() != static_cast<size_t>(input_) ||
      output.size() != static_cast<size_t>(output_) ||
      params.size() != static_cast<size_t>(param_count_)) {
    throw ValidationError("Mlp::forward: shape mismatch");
  }
  trace.acts.assign(static_cast<size_t>(act_total_), 0.0);
  for (int i = 0; i < input_; ++i) trace.acts[i] = input[i];

  for (size_t l = 0; l < layers_.size(); ++l) {
    const LayerShape& shape = layers_[l];
    const bool last = (l + 1 == layers_.size());
    const double* x = &trace.acts[act_offsets_[l]];
    double* y = last ? output.data() : &trace.acts[act_offsets_[l + 1]];
    const double* w = &params[shape.weight_offset];
    const double* b = &params[shape.bias_offset];
    for (int o = 0; o < shape.out; ++o) {
      double acc = b[o];
      const double* wrow = &w[static_cast<size_t>(o) * shape.in];
      for (int i = 0; i < shape.in; ++i) acc += wrow[i] * x[i];
      y[o] = last ? acc : std::max(acc, 0.0);
    }
    if (last) {
      // keep the output in the trace too so backward has every activation
      double* slot = &trace.acts[act_offsets_[l + 1]];
      for (int o = 0; o < shape.out; ++o) slot[o] = y[o];
    }
  }
}

void Mlp::backward(std::span<const double> params, const Trace& trace,
                   std::span<const double> d_output, std::span<double> d_params) const {
  if (d_output.size() != static_cast<size_t>(output_) ||
      d_params.size() != static_cast<size_t>(param_count_) ||
      trace.acts.size() != static_cast<size_t>(act_total_)) {
    throw ValidationError("Mlp::backward: shape mismatch");
  }
  std::vector<double> d_curr(d_output.begin(), d_output.end());
  std::vector<double> d_prev;
  for (size_t li = layers_.size(); li-- > 0;) {
    const LayerShape& shape = layers_[li];
    const bool last = (li + 1 == layers_.size());
    const double* x = &trace.acts[act_offsets_[li]];
    const double* y = &trace.acts[act_offsets_[li + 1]];
    const double* w = &params[shape.weight_offset];
    double* dw = &d_params[shape.weight_offset];
    double* db = &d_params[shape.bias_offset];

    // ReLU mask on this layer's output (last layer is linear).
    if (!last) {
      for (int o = 0; o < shape.out; ++o) {
        if (y[o] <= 0.0) d_curr[o] = 0.0;
      }
    }
    d_prev.assign(static_cast<size_t>(shape.in), 0.0);
    for (int o = 0; o < shape.out; ++o) {
      const double g = d_curr[o];
      if (g == 0.0) continue;
      db[o] += g;
      const double* wrow = &w[static_cast<size_t>(o) * shape.in];
      double* dwrow = &dw[static_cast<size_t>(o) * shape.in];
      for (int i = 0; i < shape.in; ++i) {
        dwrow[i] += g * x[i];
        d_prev[i] += g * wrow[i];
      }
    }
    d_curr.swap(d_prev);
  }
}

}  // namespace skelgrow
