#include "gridrl/neural.hpp"

#include <cmath>

#include <fmt/format.h>

#include "binary_io.hpp"
#include "gridrl/errors.hpp"

namespace gridrl {

using Eigen::ArrayXXd;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) {
    throw DimensionError("Mlp needs at least one layer");
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DenseLayer& layer = layers_[l];
    if (layer.biases.size() != layer.weights.rows()) {
      throw DimensionError(fmt::format("layer {}: bias length {} != {} outputs", l,
                                       layer.biases.size(), layer.weights.rows()));
    }
    if (l > 0 && layers_[l - 1].out_dim() != layer.in_dim()) {
      throw DimensionError(fmt::format("layer {} expects {} inputs, previous layer gives {}",
                                       l, layer.in_dim(), layers_[l - 1].out_dim()));
    }
  }
}

Mlp Mlp::create(std::span<const std::size_t> sizes, std::span<const Activation> activations,
                std::mt19937_64& rng, double final_scale) {
  if (sizes.size() < 2 || activations.size() != sizes.size() - 1) {
    throw DimensionError("Mlp::create: need n+1 sizes and n activations");
  }
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const auto in = static_cast<Index>(sizes[l]);
    const auto out = static_cast<Index>(sizes[l + 1]);
    const bool last = l + 2 == sizes.size();
    const double scale =
        (last && final_scale > 0.0) ? final_scale : 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-scale, scale);
    DenseLayer layer;
    layer.weights = MatrixXd::NullaryExpr(out, in, [&]() { return u(rng); });
    layer.biases = VectorXd::NullaryExpr(out, [&]() { return u(rng); });
    layer.activation = activations[l];
    layers.push_back(std::move(layer));
  }
  return Mlp(std::move(layers));
}

std::size_t Mlp::in_dim() const {
  return layers_.empty() ? 0 : layers_.front().in_dim();
}

std::size_t Mlp::out_dim() const {
  return layers_.empty() ? 0 : layers_.back().out_dim();
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const DenseLayer& layer : layers_) {
    n += static_cast<std::size_t>(layer.weights.size() + layer.biases.size());
  }
  return n;
}

bool Mlp::all_finite() const {
  for (const DenseLayer& layer : layers_) {
    if (!layer.weights.allFinite() || !layer.biases.allFinite()) {
      return false;
    }
  }
  return true;
}

namespace {

void activate(MatrixXd& z, Activation act) {
  switch (act) {
    case Activation::relu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::tanh:
      z = z.array().tanh().matrix();
      break;
    case Activation::identity:
      break;
  }
}

// d act / d z expressed through the activation output y.
ArrayXXd derivative(const MatrixXd& y, Activation act) {
  switch (act) {
    case Activation::relu:
      return (y.array() > 0.0).cast<double>();
    case Activation::tanh:
      return 1.0 - y.array().square();
    case Activation::identity:
      break;
  }
  return ArrayXXd::Ones(y.rows(), y.cols());
}

}  // namespace

MatrixXd forward(const Mlp& net, const MatrixXd& batch, ForwardCache* cache) {
  if (static_cast<std::size_t>(batch.rows()) != net.in_dim()) {
    throw DimensionError(fmt::format("forward: input has {} rows, network expects {}",
                                     batch.rows(), net.in_dim()));
  }
  if (cache != nullptr) {
    cache->outputs.clear();
    cache->outputs.reserve(net.layers().size() + 1);
    cache->outputs.push_back(batch);
  }
  MatrixXd h = batch;
  for (const DenseLayer& layer : net.layers()) {
    MatrixXd z = layer.weights * h;
    z.colwise() += layer.biases;
    activate(z, layer.activation);
    h = std::move(z);
    if (cache != nullptr) {
      cache->outputs.push_back(h);
    }
  }
  return h;
}

VectorXd forward(const Mlp& net, const VectorXd& x) {
  const MatrixXd out = forward(net, MatrixXd(x), nullptr);
  return out.col(0);
}

MlpGradients MlpGradients::zeros_like(const Mlp& net) {
  MlpGradients g;
  for (const DenseLayer& layer : net.layers()) {
    g.weights.push_back(MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()));
    g.biases.push_back(VectorXd::Zero(layer.biases.size()));
  }
  return g;
}

bool MlpGradients::all_finite() const {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].allFinite() || !biases[l].allFinite()) {
      return false;
    }
  }
  return true;
}

BackwardResult backward(const Mlp& net, const ForwardCache& cache, const MatrixXd& upstream) {
  const auto layers = net.layers();
  if (cache.outputs.size() != layers.size() + 1) {
    throw ContractError("backward: forward cache missing or from another network");
  }
  if (upstream.rows() != cache.outputs.back().rows() ||
      upstream.cols() != cache.outputs.back().cols()) {
    throw DimensionError("backward: upstream gradient shape does not match output");
  }
  BackwardResult out;
  out.params.weights.resize(layers.size());
  out.params.biases.resize(layers.size());
  MatrixXd delta = upstream;
  for (std::size_t l = layers.size(); l-- > 0;) {
    const DenseLayer& layer = layers[l];
    delta = (delta.array() * derivative(cache.outputs[l + 1], layer.activation)).matrix();
    out.params.weights[l] = delta * cache.outputs[l].transpose();
    out.params.biases[l] = delta.rowwise().sum();
    delta = layer.weights.transpose() * delta;
  }
  out.input = std::move(delta);
  return out;
}

Adam::Adam(const Mlp& net, AdamConfig config)
    : config_(config), m_(MlpGradients::zeros_like(net)), v_(MlpGradients::zeros_like(net)) {}

bool Adam::step(Mlp& net, const MlpGradients& grads) {
  auto& layers = net.mutable_layers();
  if (grads.weights.size() != layers.size() || m_.weights.size() != layers.size()) {
    throw DimensionError("Adam: gradient does not match network");
  }
  if (!grads.all_finite()) {
    return false;
  }
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = config_.learning_rate;
  const double eps = config_.epsilon;
  auto apply = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    apply(layers[l].weights, m_.weights[l], v_.weights[l], grads.weights[l]);
    apply(layers[l].biases, m_.biases[l], v_.biases[l], grads.biases[l]);
  }
  return true;
}

void Adam::write(std::ostream& out) const {
  io::put_tag(out, "adam");
  io::put(out, config_.learning_rate);
  io::put(out, config_.beta1);
  io::put(out, config_.beta2);
  io::put(out, config_.epsilon);
  io::put<std::uint64_t>(out, t_);
  io::put<std::uint64_t>(out, m_.weights.size());
  for (std::size_t l = 0; l < m_.weights.size(); ++l) {
    io::put_matrix(out, m_.weights[l]);
    io::put_vector(out, m_.biases[l]);
    io::put_matrix(out, v_.weights[l]);
    io::put_vector(out, v_.biases[l]);
  }
}

Adam Adam::read(std::istream& in) {
  io::expect_tag(in, "adam");
  Adam a;
  a.config_.learning_rate = io::get<double>(in);
  a.config_.beta1 = io::get<double>(in);
  a.config_.beta2 = io::get<double>(in);
  a.config_.epsilon = io::get<double>(in);
  a.t_ = io::get<std::uint64_t>(in);
  const auto layers = io::get<std::uint64_t>(in);
  for (std::uint64_t l = 0; l < layers; ++l) {
    a.m_.weights.push_back(io::get_matrix(in));
    a.m_.biases.push_back(io::get_vector(in));
    a.v_.weights.push_back(io::get_matrix(in));
    a.v_.biases.push_back(io::get_vector(in));
  }
  return a;
}

Normalizer::Normalizer(std::size_t dim, double epsilon)
    : mean_(VectorXd::Zero(static_cast<Index>(dim))),
      m2_(VectorXd::Zero(static_cast<Index>(dim))),
      epsilon_(epsilon) {}

void Normalizer::update(const VectorXd& sample) { update(MatrixXd(sample)); }

void Normalizer::update(const MatrixXd& batch) {
  if (batch.rows() != mean_.size()) {
    throw DimensionError("Normalizer::update: dimension mismatch");
  }
  const auto n = static_cast<double>(batch.cols());
  if (n == 0.0) {
    return;
  }
  const VectorXd batch_mean = batch.rowwise().mean();
  const VectorXd batch_m2 =
      (batch.colwise() - batch_mean).array().square().rowwise().sum().matrix();
  // Chan et al. pairwise merge of (count, mean, M2).
  const double total = count_ + n;
  const VectorXd delta = batch_mean - mean_;
  mean_ += delta * (n / total);
  m2_ += batch_m2 + delta.cwiseProduct(delta) * (count_ * n / total);
  count_ = total;
}

VectorXd Normalizer::variance() const {
  if (count_ == 0.0) {
    return VectorXd::Ones(mean_.size());
  }
  return (m2_ / count_).cwiseMax(0.0);
}

VectorXd Normalizer::normalize(const VectorXd& x) const {
  if (x.size() != mean_.size()) {
    throw DimensionError("Normalizer::normalize: dimension mismatch");
  }
  return ((x - mean_).array() / (variance().array() + epsilon_).sqrt()).matrix();
}

MatrixXd Normalizer::normalize(const MatrixXd& batch) const {
  if (batch.rows() != mean_.size()) {
    throw DimensionError("Normalizer::normalize: dimension mismatch");
  }
  const VectorXd inv_std = (variance().array() + epsilon_).rsqrt().matrix();
  return (batch.colwise() - mean_).array().colwise() * inv_std.array();
}

void Normalizer::write(std::ostream& out) const {
  io::put_tag(out, "normalizer");
  io::put(out, count_);
  io::put(out, epsilon_);
  io::put_vector(out, mean_);
  io::put_vector(out, m2_);
}

Normalizer Normalizer::read(std::istream& in) {
  io::expect_tag(in, "normalizer");
  Normalizer n;
  n.count_ = io::get<double>(in);
  n.epsilon_ = io::get<double>(in);
  n.mean_ = io::get_vector(in);
  n.m2_ = io::get_vector(in);
  if (n.mean_.size() != n.m2_.size()) {
    throw SchemaError("checkpoint: normalizer statistics disagree in size");
  }
  return n;
}

void write_mlp(std::ostream& out, const Mlp& net) {
  io::put_tag(out, "mlp");
  io::put<std::uint64_t>(out, net.layers().size());
  for (const DenseLayer& layer : net.layers()) {
    io::put<std::uint32_t>(out, static_cast<std::uint32_t>(layer.activation));
    io::put_matrix(out, layer.weights);
    io::put_vector(out, layer.biases);
  }
}

Mlp read_mlp(std::istream& in) {
  io::expect_tag(in, "mlp");
  const auto count = io::get<std::uint64_t>(in);
  std::vector<DenseLayer> layers;
  for (std::uint64_t l = 0; l < count; ++l) {
    DenseLayer layer;
    const auto act = io::get<std::uint32_t>(in);
    if (act > static_cast<std::uint32_t>(Activation::identity)) {
      throw SchemaError("checkpoint: unknown activation");
    }
    layer.activation = static_cast<Activation>(act);
    layer.weights = io::get_matrix(in);
    layer.biases = io::get_vector(in);
    layers.push_back(std::move(layer));
  }
  return Mlp(std::move(layers));
}

}  // namespace gridrl
