#pragma once

#include <cstddef>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace gridrl {

enum class Activation { relu, tanh, identity };

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd biases;   // out
  Activation activation = Activation::identity;

  std::size_t in_dim() const noexcept { return static_cast<std::size_t>(weights.cols()); }
  std::size_t out_dim() const noexcept { return static_cast<std::size_t>(weights.rows()); }
};

// Fully connected feed-forward network.
class Mlp {
 public:
  Mlp() = default;
  // Throws DimensionError if adjacent layers do not chain.
  explicit Mlp(std::vector<DenseLayer> layers);

  // Layer widths sizes[0] -> sizes[1] -> ... with one activation per layer.
  // Weights and biases are drawn uniformly in +-1/sqrt(fan_in); the last
  // layer uses +-final_scale instead when final_scale > 0.
  static Mlp create(std::span<const std::size_t> sizes,
                    std::span<const Activation> activations, std::mt19937_64& rng,
                    double final_scale = 0.0);

  std::size_t in_dim() const;
  std::size_t out_dim() const;
  std::size_t parameter_count() const;
  bool all_finite() const;

  std::span<const DenseLayer> layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& mutable_layers() noexcept { return layers_; }

 private:
  std::vector<DenseLayer> layers_;
};

// Per-layer outputs of a batched forward pass; outputs[0] is the input.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> outputs;

  bool empty() const noexcept { return outputs.empty(); }
  std::size_t batch() const noexcept {
    return outputs.empty() ? 0 : static_cast<std::size_t>(outputs.front().cols());
  }
};

Eigen::VectorXd forward(const Mlp& net, const Eigen::VectorXd& x);
// Columns of `batch` are samples. Fills `cache` when given.
Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& batch,
                        ForwardCache* cache = nullptr);

struct MlpGradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static MlpGradients zeros_like(const Mlp& net);
  bool all_finite() const;
};

struct BackwardResult {
  MlpGradients params;
  Eigen::MatrixXd input;  // d objective / d input, one column per sample
};

// Gradients of sum_b <upstream[:, b], net(x_b)> w.r.t. parameters and
// inputs. Throws ContractError if the cache is missing or stale.
BackwardResult backward(const Mlp& net, const ForwardCache& cache,
                        const Eigen::MatrixXd& upstream);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction. Moments are shaped like the network.
class Adam {
 public:
  Adam() = default;
  Adam(const Mlp& net, AdamConfig config);

  // Descends along `grads`. Returns false and leaves the network untouched
  // if any gradient is non-finite.
  bool step(Mlp& net, const MlpGradients& grads);

  const AdamConfig& config() const noexcept { return config_; }
  std::size_t steps() const noexcept { return t_; }

  void write(std::ostream& out) const;
  static Adam read(std::istream& in);

 private:
  AdamConfig config_;
  std::size_t t_ = 0;
  MlpGradients m_;
  MlpGradients v_;
};

// Running per-dimension mean and variance (population), merged batch-wise.
class Normalizer {
 public:
  Normalizer() = default;
  explicit Normalizer(std::size_t dim, double epsilon = 1e-5);

  void update(const Eigen::VectorXd& sample);
  // Columns of `batch` are samples.
  void update(const Eigen::MatrixXd& batch);

  Eigen::VectorXd normalize(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd normalize(const Eigen::MatrixXd& batch) const;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(mean_.size()); }
  double count() const noexcept { return count_; }
  const Eigen::VectorXd& mean() const noexcept { return mean_; }
  Eigen::VectorXd variance() const;
  double epsilon() const noexcept { return epsilon_; }

  void write(std::ostream& out) const;
  static Normalizer read(std::istream& in);

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd m2_;
  double count_ = 0.0;
  double epsilon_ = 1e-5;
};

void write_mlp(std::ostream& out, const Mlp& net);
Mlp read_mlp(std::istream& in);

}  // namespace gridrl
