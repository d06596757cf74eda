#pragma once

// Feed-forward dense networks: affine layers with tanh or identity activation,
// batched forward/backward over column-stacked samples, Glorot init, Adam.

#include "hardid/rng.hpp"
#include "hardid/types.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace hardid {

enum class Activation { Tanh, Identity };

struct LayerSpec {
  int in_dim = 1;
  int out_dim = 1;
  Activation activation = Activation::Identity;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Weights (out x in) and biases per layer. Also the shape of gradients and
/// optimizer moments.
template <typename Scalar>
struct NetParams {
  std::vector<Matrix<Scalar>> weights;
  std::vector<Vector<Scalar>> biases;

  static NetParams zerosLike(const NetParams& other) {
    NetParams z;
    for (const auto& w : other.weights) z.weights.push_back(Matrix<Scalar>::Zero(w.rows(), w.cols()));
    for (const auto& b : other.biases) z.biases.push_back(Vector<Scalar>::Zero(b.size()));
    return z;
  }

  Eigen::Index size() const {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
  }

  bool sameShape(const NetParams& other) const {
    if (weights.size() != other.weights.size() || biases.size() != other.biases.size()) return false;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (weights[l].rows() != other.weights[l].rows() ||
          weights[l].cols() != other.weights[l].cols() ||
          biases[l].size() != other.biases[l].size()) {
        return false;
      }
    }
    return true;
  }

  bool allFinite() const {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
    }
    return true;
  }

  NetParams& operator+=(const NetParams& other) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      weights[l] += other.weights[l];
      biases[l] += other.biases[l];
    }
    return *this;
  }

  // Layer-by-layer, weights column-major then biases.
  Vector<Scalar> flatten() const {
    Vector<Scalar> flat(size());
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      flat.segment(at, weights[l].size()) = weights[l].reshaped();
      at += weights[l].size();
      flat.segment(at, biases[l].size()) = biases[l];
      at += biases[l].size();
    }
    return flat;
  }

  void unflatten(const Eigen::Ref<const Vector<Scalar>>& flat) {
    if (flat.size() != size()) throw std::invalid_argument("flat parameter vector has the wrong length");
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      weights[l].reshaped() = flat.segment(at, weights[l].size());
      at += weights[l].size();
      biases[l] = flat.segment(at, biases[l].size());
      at += biases[l].size();
    }
  }
};

template <typename Scalar>
class DenseNet {
 public:
  DenseNet() = default;

  /// Zero-initialized net; throws if adjacent layer dimensions do not chain.
  explicit DenseNet(std::vector<LayerSpec> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw std::invalid_argument("network needs at least one layer");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& s = layers_[l];
      if (s.in_dim < 1 || s.out_dim < 1) throw std::invalid_argument("layer dimensions must be >= 1");
      if (l > 0 && layers_[l - 1].out_dim != s.in_dim) {
        throw std::invalid_argument("layer " + std::to_string(l) + " expects " +
                                    std::to_string(s.in_dim) + " inputs but layer " +
                                    std::to_string(l - 1) + " emits " +
                                    std::to_string(layers_[l - 1].out_dim));
      }
      params_.weights.push_back(Matrix<Scalar>::Zero(s.out_dim, s.in_dim));
      params_.biases.push_back(Vector<Scalar>::Zero(s.out_dim));
    }
  }

  const std::vector<LayerSpec>& layers() const { return layers_; }
  const NetParams<Scalar>& params() const { return params_; }
  NetParams<Scalar>& params() { return params_; }

  int inDim() const { return layers_.front().in_dim; }
  int outDim() const { return layers_.back().out_dim; }

  /// Sum over layers of in * out + out.
  Eigen::Index countParams() const { return params_.size(); }

 private:
  std::vector<LayerSpec> layers_;
  NetParams<Scalar> params_;
};

using DenseNetd = DenseNet<double>;

/// Glorot-uniform weights in +-sqrt(6 / (in + out)), zero biases.
template <typename Scalar>
DenseNet<Scalar> initNet(std::vector<LayerSpec> layers, std::uint64_t seed) {
  DenseNet<Scalar> net(std::move(layers));
  Rng rng(seed);
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const auto& s = net.layers()[l];
    const double bound = std::sqrt(6.0 / double(s.in_dim + s.out_dim));
    auto& w = net.params().weights[l];
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = Scalar(rng.uniform(-bound, bound));
    }
  }
  return net;
}

/// Post-activation outputs of every layer, input first.
template <typename Scalar>
struct ForwardCache {
  std::vector<Matrix<Scalar>> activations;
};

/// Forward pass over a batch with one sample per column.
template <typename Scalar, typename Derived>
Matrix<Scalar> forward(const DenseNet<Scalar>& net, const Eigen::MatrixBase<Derived>& input,
                       ForwardCache<Scalar>* cache = nullptr) {
  if (input.rows() != net.inDim()) {
    throw std::invalid_argument("network expects " + std::to_string(net.inDim()) +
                                " inputs, got " + std::to_string(input.rows()));
  }
  Matrix<Scalar> a = input;
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(a);
  }
  const auto& p = net.params();
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    Matrix<Scalar> z = p.weights[l] * a;
    z.colwise() += p.biases[l];
    if (net.layers()[l].activation == Activation::Tanh) z = z.array().tanh();
    a = std::move(z);
    if (cache) cache->activations.push_back(a);
  }
  return a;
}

/// Parameter gradients of a scalar loss, given dLoss/dOutput for the batch
/// cached by the matching forward call. Contributions of all columns are
/// summed. If `input_grad` is set it receives dLoss/dInput.
template <typename Scalar, typename Derived>
NetParams<Scalar> backward(const DenseNet<Scalar>& net, const ForwardCache<Scalar>& cache,
                           const Eigen::MatrixBase<Derived>& output_grad,
                           Matrix<Scalar>* input_grad = nullptr) {
  const std::size_t depth = net.layers().size();
  if (cache.activations.size() != depth + 1) {
    throw std::invalid_argument("forward cache does not match the network depth");
  }
  if (output_grad.rows() != net.outDim() || output_grad.cols() != cache.activations.back().cols()) {
    throw std::invalid_argument("output gradient shape does not match the cached batch");
  }
  NetParams<Scalar> grads;
  grads.weights.resize(depth);
  grads.biases.resize(depth);
  Matrix<Scalar> delta = output_grad;
  for (std::size_t l = depth; l-- > 0;) {
    if (net.layers()[l].activation == Activation::Tanh) {
      delta.array() *= Scalar(1) - cache.activations[l + 1].array().square();
    }
    grads.weights[l].noalias() = delta * cache.activations[l].transpose();
    grads.biases[l] = delta.rowwise().sum();
    if (l > 0 || input_grad) {
      Matrix<Scalar> prev = net.params().weights[l].transpose() * delta;
      delta = std::move(prev);
    }
  }
  if (input_grad) *input_grad = std::move(delta);
  return grads;
}

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename Scalar>
struct AdamState {
  std::int64_t step = 0;
  NetParams<Scalar> first_moment;
  NetParams<Scalar> second_moment;

  static AdamState forParams(const NetParams<Scalar>& params) {
    return {0, NetParams<Scalar>::zerosLike(params), NetParams<Scalar>::zerosLike(params)};
  }
};

/// One bias-corrected Adam update of `params` in place.
template <typename Scalar>
void adamStep(NetParams<Scalar>& params, const NetParams<Scalar>& grads, AdamState<Scalar>& state,
              const AdamConfig& cfg) {
  if (!params.sameShape(grads) || !params.sameShape(state.first_moment) ||
      !params.sameShape(state.second_moment)) {
    throw std::invalid_argument("Adam step: parameter, gradient and moment shapes differ");
  }
  ++state.step;
  const Scalar b1(cfg.beta1), b2(cfg.beta2);
  const Scalar correction1 = Scalar(1) - Scalar(std::pow(cfg.beta1, double(state.step)));
  const Scalar correction2 = Scalar(1) - Scalar(std::pow(cfg.beta2, double(state.step)));
  const Scalar lr(cfg.learning_rate), eps(cfg.epsilon);

  auto update = [&](auto& value, const auto& grad, auto& m, auto& v) {
    m = b1 * m + (Scalar(1) - b1) * grad;
    v = b2 * v + (Scalar(1) - b2) * grad.cwiseAbs2();
    value.array() -= lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    update(params.weights[l], grads.weights[l], state.first_moment.weights[l],
           state.second_moment.weights[l]);
    update(params.biases[l], grads.biases[l], state.first_moment.biases[l],
           state.second_moment.biases[l]);
  }
}

/// Per-feature affine normalization x -> (x - offset) / scale.
template <typename Scalar>
struct Standardizer {
  Vector<Scalar> offset;
  Vector<Scalar> scale;

  static Standardizer identity(int dim) {
    return {Vector<Scalar>::Zero(dim), Vector<Scalar>::Ones(dim)};
  }

  /// Column-wise mean and population std of `samples` (features x count);
  /// features with (near) zero spread keep scale 1.
  template <typename Derived>
  static Standardizer fit(const Eigen::MatrixBase<Derived>& samples) {
    Standardizer s;
    s.offset = samples.rowwise().mean();
    s.scale = ((samples.colwise() - s.offset).array().square().rowwise().mean()).sqrt().matrix();
    for (Eigen::Index i = 0; i < s.scale.size(); ++i) {
      if (!(s.scale[i] > Scalar(1e-12) * (Scalar(1) + std::abs(s.offset[i])))) s.scale[i] = Scalar(1);
    }
    return s;
  }

  template <typename Derived>
  Matrix<Scalar> apply(const Eigen::MatrixBase<Derived>& x) const {
    return (x.colwise() - offset).array().colwise() / scale.array();
  }

  template <typename Derived>
  Matrix<Scalar> invert(const Eigen::MatrixBase<Derived>& y) const {
    return ((y.array().colwise() * scale.array()).matrix()).colwise() + offset;
  }
};

}  // namespace hardid
