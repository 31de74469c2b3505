#include "krylovrl/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace krylovrl {

Mlp::Mlp(const std::vector<std::size_t>& sizes, Rng* rng) {
  if (sizes.size() < 2) {
    throw std::invalid_argument("Mlp: need at least input and output sizes");
  }
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    Layer layer;
    layer.in = sizes[l];
    layer.out = sizes[l + 1];
    layer.w.assign(layer.in * layer.out, 0.0);
    layer.b.assign(layer.out, 0.0);
    if (rng) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
      for (double& w : layer.w) w = rng->uniform(-bound, bound);
    }
    layers_.push_back(std::move(layer));
  }
}

DenseVector Mlp::forward(const DenseVector& x, Cache* cache) const {
  if (x.size() != layers_.front().in) {
    throw std::invalid_argument("Mlp::forward: input size mismatch");
  }
  if (cache) {
    cache->input = x;
    cache->pre.clear();
    cache->post.clear();
  }
  DenseVector cur = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    DenseVector next(layer.out);
    for (std::size_t o = 0; o < layer.out; ++o) {
      double s = layer.b[o];
      for (std::size_t i = 0; i < layer.in; ++i) {
        s += layer.w[o * layer.in + i] * cur[i];
      }
      next[o] = s;
    }
    if (cache) cache->pre.push_back(next);
    if (l + 1 < layers_.size()) {
      for (double& v : next) v = std::tanh(v);
    }
    if (cache) cache->post.push_back(next);
    cur = std::move(next);
  }
  return cur;
}

void Mlp::backward(const Cache& cache, const DenseVector& dout, Gradient& grad) const {
  DenseVector delta = dout;  // d loss / d pre-activation of current layer
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const Layer& layer = layers_[li];
    // Output layer is linear; hidden layers need the tanh derivative.
    if (li + 1 < layers_.size()) {
      for (std::size_t o = 0; o < layer.out; ++o) {
        const double t = cache.post[li][o];
        delta[o] *= 1.0 - t * t;
      }
    }
    const DenseVector& input = li == 0 ? cache.input : cache.post[li - 1];
    Layer& g = grad.layers[li];
    for (std::size_t o = 0; o < layer.out; ++o) {
      g.b[o] += delta[o];
      for (std::size_t i = 0; i < layer.in; ++i) {
        g.w[o * layer.in + i] += delta[o] * input[i];
      }
    }
    if (li == 0) break;
    DenseVector prev(layer.in, 0.0);
    for (std::size_t o = 0; o < layer.out; ++o) {
      for (std::size_t i = 0; i < layer.in; ++i) {
        prev[i] += layer.w[o * layer.in + i] * delta[o];
      }
    }
    delta = std::move(prev);
  }
}

Mlp::Gradient Mlp::zero_gradient() const {
  Gradient g;
  for (const Layer& layer : layers_) {
    Layer z;
    z.in = layer.in;
    z.out = layer.out;
    z.w.assign(layer.w.size(), 0.0);
    z.b.assign(layer.b.size(), 0.0);
    g.layers.push_back(std::move(z));
  }
  return g;
}

std::vector<std::size_t> Mlp::layer_sizes() const {
  std::vector<std::size_t> s{layers_.front().in};
  for (const Layer& l : layers_) s.push_back(l.out);
  return s;
}

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers_) n += l.w.size() + l.b.size();
  return n;
}

DenseVector softmax(const DenseVector& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  DenseVector p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

}  // namespace krylovrl
