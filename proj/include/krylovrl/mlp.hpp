#pragma once

#include <cstdint>
#include <vector>

#include "krylovrl/rng.hpp"
#include "krylovrl/sparse.hpp"

namespace krylovrl {

/// Fully connected net with tanh hidden activations and a linear output
/// layer. Weights are row-major (out x in). Backward pass is analytic.
class Mlp {
 public:
  struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> w;  // out x in
    std::vector<double> b;  // out
  };

  struct Cache {
    DenseVector input;
    std::vector<DenseVector> pre;   // pre-activation per layer
    std::vector<DenseVector> post;  // post-activation per layer
  };

  /// Gradient accumulator shaped like the net's parameters.
  struct Gradient {
    std::vector<Layer> layers;
  };

  Mlp() = default;
  /// sizes = {in, hidden..., out}. Zero-initialized when rng is null,
  /// otherwise uniform in +-1/sqrt(fan_in).
  Mlp(const std::vector<std::size_t>& sizes, Rng* rng);

  DenseVector forward(const DenseVector& x, Cache* cache = nullptr) const;

  /// Accumulates d(loss)/d(params) into grad given d(loss)/d(output).
  void backward(const Cache& cache, const DenseVector& dout, Gradient& grad) const;

  Gradient zero_gradient() const;

  std::vector<std::size_t> layer_sizes() const;
  std::size_t param_count() const;

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  /// Visits every parameter as (value ref, matching gradient ref).
  template <typename F>
  void for_each_param(Gradient& grad, F&& f) {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      for (std::size_t i = 0; i < layers_[l].w.size(); ++i) {
        f(layers_[l].w[i], grad.layers[l].w[i]);
      }
      for (std::size_t i = 0; i < layers_[l].b.size(); ++i) {
        f(layers_[l].b[i], grad.layers[l].b[i]);
      }
    }
  }

 private:
  std::vector<Layer> layers_;
};

/// Numerically stable softmax.
DenseVector softmax(const DenseVector& logits);

}  // namespace krylovrl
