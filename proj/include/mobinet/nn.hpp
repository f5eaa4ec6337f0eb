#pragma once

// Minimal differentiable kernels for the GAN: 2-D convolution, transposed
// convolution, batch normalization, activations, binary cross-entropy and
// Adam. Every layer has a hand-derived backward pass; there is no autodiff
// graph. All arithmetic is in double precision.

#include <Eigen/Dense>

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mobinet/error.hpp"
#include "mobinet/random.hpp"

namespace mobinet::nn {

using Index = Eigen::Index;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense (N, C, H, W) tensor, row-major.
class Tensor4 {
 public:
  Tensor4() = default;
  Tensor4(Index n, Index c, Index h, Index w, double fill = 0.0);

  Index n() const { return dims_[0]; }
  Index c() const { return dims_[1]; }
  Index h() const { return dims_[2]; }
  Index w() const { return dims_[3]; }
  const std::array<Index, 4>& dims() const { return dims_; }
  Index size() const { return data_.size(); }
  bool same_shape(const Tensor4& o) const { return dims_ == o.dims_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  Eigen::VectorXd& flat() { return data_; }
  const Eigen::VectorXd& flat() const { return data_; }

  double& operator()(Index n, Index c, Index h, Index w) {
    return data_[((n * dims_[1] + c) * dims_[2] + h) * dims_[3] + w];
  }
  double operator()(Index n, Index c, Index h, Index w) const {
    return data_[((n * dims_[1] + c) * dims_[2] + h) * dims_[3] + w];
  }

  /// Sample n viewed as a (C, H*W) matrix.
  Eigen::Map<RowMatrix> sample(Index n) {
    return {data_.data() + n * dims_[1] * dims_[2] * dims_[3], dims_[1], dims_[2] * dims_[3]};
  }
  Eigen::Map<const RowMatrix> sample(Index n) const {
    return {data_.data() + n * dims_[1] * dims_[2] * dims_[3], dims_[1], dims_[2] * dims_[3]};
  }

 private:
  std::array<Index, 4> dims_{0, 0, 0, 0};
  Eigen::VectorXd data_;
};

std::string shape_string(const Tensor4& t);

/// A trainable tensor with its gradient and Adam moments.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, std::vector<Index> shape);

  std::string name;
  std::vector<Index> shape;
  Eigen::VectorXd value;
  Eigen::VectorXd grad;
  Eigen::VectorXd adam_m;
  Eigen::VectorXd adam_v;
  long long adam_step = 0;

  Index size() const { return value.size(); }
  void zero_grad() { grad.setZero(); }
};

struct AdamConfig {
  double lr = 2e-4;
  double b1 = 0.5;
  double b2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam update of p.value from p.grad.
void adam_step(Parameter& p, const AdamConfig& cfg);

enum class Mode { kTrain, kEval };

struct ConvSpec {
  Index in_channels = 1;
  Index out_channels = 1;
  Index kernel = 1;
  Index stride = 1;
  Index pad = 0;
};

/// floor((in + 2 pad - K) / stride) + 1
Index conv_out_size(Index in, const ConvSpec& spec);
/// (in - 1) stride - 2 pad + K
Index conv_transpose_out_size(Index in, const ConvSpec& spec);

// ---- kernels ---------------------------------------------------------------
// Weights are flat: conv2d (Cout, Cin, K, K); conv_transpose2d (Cin, Cout, K, K),
// the PyTorch layouts. An empty bias vector means "no bias". Backward
// functions return the input gradient and accumulate into the weight/bias
// gradients (skipped when the corresponding pointer is null).

Tensor4 conv2d_forward(const Tensor4& x, const ConvSpec& spec, const Eigen::VectorXd& weight,
                       const Eigen::VectorXd& bias);
Tensor4 conv2d_backward(const Tensor4& x, const ConvSpec& spec, const Eigen::VectorXd& weight,
                        const Tensor4& grad_out, Eigen::VectorXd* grad_weight,
                        Eigen::VectorXd* grad_bias);

Tensor4 conv_transpose2d_forward(const Tensor4& x, const ConvSpec& spec,
                                 const Eigen::VectorXd& weight, const Eigen::VectorXd& bias);
Tensor4 conv_transpose2d_backward(const Tensor4& x, const ConvSpec& spec,
                                  const Eigen::VectorXd& weight, const Tensor4& grad_out,
                                  Eigen::VectorXd* grad_weight, Eigen::VectorXd* grad_bias);

struct BatchNormStats {
  Eigen::VectorXd running_mean;
  Eigen::VectorXd running_var;
};

struct BatchNormCache {
  Mode mode = Mode::kTrain;
  Tensor4 xhat;
  Eigen::VectorXd inv_std;
};

/// TRAIN normalizes with biased batch statistics and folds them into the
/// running statistics (unbiased variance, PyTorch momentum convention);
/// EVAL normalizes with the running statistics.
Tensor4 batchnorm2d_forward(const Tensor4& x, const Eigen::VectorXd& gamma,
                            const Eigen::VectorXd& beta, BatchNormStats& stats, Mode mode,
                            double momentum, double eps, BatchNormCache* cache);
Tensor4 batchnorm2d_backward(const Tensor4& grad_out, const Eigen::VectorXd& gamma,
                             const BatchNormCache& cache, Eigen::VectorXd* grad_gamma,
                             Eigen::VectorXd* grad_beta);

Tensor4 relu(const Tensor4& x);
Tensor4 relu_backward(const Tensor4& x, const Tensor4& grad_out);
Tensor4 leaky_relu(const Tensor4& x, double slope = 0.2);
Tensor4 leaky_relu_backward(const Tensor4& x, const Tensor4& grad_out, double slope = 0.2);
Tensor4 sigmoid(const Tensor4& x);
/// Takes the sigmoid output, not its input.
Tensor4 sigmoid_backward(const Tensor4& y, const Tensor4& grad_out);

inline constexpr double kBceClamp = 1e-7;

/// mean of -[t ln p + (1 - t) ln(1 - p)], p clamped to [1e-7, 1 - 1e-7].
double bce_loss(std::span<const double> pred, std::span<const double> target);
/// d loss / d pred, evaluated at the clamped prediction.
Eigen::VectorXd bce_backward(std::span<const double> pred, std::span<const double> target);

// ---- layers ----------------------------------------------------------------

/// A layer caches what its backward pass needs during forward. backward()
/// must follow the matching forward(); param_grads=false skips the
/// (accumulating) parameter gradients and only propagates to the input.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor4 forward(const Tensor4& x, Mode mode) = 0;
  virtual Tensor4 backward(const Tensor4& grad_out, bool param_grads) = 0;
  virtual std::vector<Parameter*> parameters() { return {}; }
  /// Non-trainable state that must be checkpointed (batch-norm running stats).
  virtual std::vector<std::pair<std::string, Eigen::VectorXd*>> buffers() { return {}; }
  virtual std::string describe() const = 0;
};

class Conv2d final : public Layer {
 public:
  Conv2d(const ConvSpec& spec, bool bias);
  Tensor4 forward(const Tensor4& x, Mode mode) override;
  Tensor4 backward(const Tensor4& grad_out, bool param_grads) override;
  std::vector<Parameter*> parameters() override;
  std::string describe() const override;
  const ConvSpec& spec() const { return spec_; }
  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  ConvSpec spec_;
  Parameter weight_;
  Parameter bias_;
  Tensor4 input_;
};

class ConvTranspose2d final : public Layer {
 public:
  ConvTranspose2d(const ConvSpec& spec, bool bias);
  Tensor4 forward(const Tensor4& x, Mode mode) override;
  Tensor4 backward(const Tensor4& grad_out, bool param_grads) override;
  std::vector<Parameter*> parameters() override;
  std::string describe() const override;
  const ConvSpec& spec() const { return spec_; }
  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  ConvSpec spec_;
  Parameter weight_;
  Parameter bias_;
  Tensor4 input_;
};

class BatchNorm2d final : public Layer {
 public:
  explicit BatchNorm2d(Index channels, double momentum = 0.1, double eps = 1e-5);
  Tensor4 forward(const Tensor4& x, Mode mode) override;
  Tensor4 backward(const Tensor4& grad_out, bool param_grads) override;
  std::vector<Parameter*> parameters() override { return {&gamma_, &beta_}; }
  std::vector<std::pair<std::string, Eigen::VectorXd*>> buffers() override;
  std::string describe() const override;
  Parameter& gamma() { return gamma_; }
  Parameter& beta() { return beta_; }
  BatchNormStats& stats() { return stats_; }

 private:
  double momentum_;
  double eps_;
  Parameter gamma_;
  Parameter beta_;
  BatchNormStats stats_;
  BatchNormCache cache_;
};

class ReLU final : public Layer {
 public:
  Tensor4 forward(const Tensor4& x, Mode mode) override;
  Tensor4 backward(const Tensor4& grad_out, bool param_grads) override;
  std::string describe() const override { return "ReLU"; }

 private:
  Tensor4 input_;
};

class LeakyReLU final : public Layer {
 public:
  explicit LeakyReLU(double slope = 0.2) : slope_(slope) {}
  Tensor4 forward(const Tensor4& x, Mode mode) override;
  Tensor4 backward(const Tensor4& grad_out, bool param_grads) override;
  std::string describe() const override;

 private:
  double slope_;
  Tensor4 input_;
};

class Sigmoid final : public Layer {
 public:
  Tensor4 forward(const Tensor4& x, Mode mode) override;
  Tensor4 backward(const Tensor4& grad_out, bool param_grads) override;
  std::string describe() const override { return "Sigmoid"; }

 private:
  Tensor4 output_;
};

class Sequential {
 public:
  Sequential() = default;
  Sequential(Sequential&&) = default;
  Sequential& operator=(Sequential&&) = default;

  template <typename L, typename... Args>
  L& add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  Tensor4 forward(const Tensor4& x, Mode mode);
  Tensor4 backward(const Tensor4& grad_out, bool param_grads = true);

  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t k) { return *layers_[k]; }

  /// Parameters in layer order; names are "<k>.<weight|bias|gamma|beta>".
  std::vector<Parameter*> parameters();
  std::vector<std::pair<std::string, Eigen::VectorXd*>> buffers();
  void zero_grad();
  void adam_step(const AdamConfig& cfg);

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

/// Convolution weights ~ N(0, 0.02), biases 0, batch-norm gamma ~ N(1, 0.02),
/// beta 0.
void init_dcgan(Sequential& net, Rng& rng);

// ---- checkpoints -----------------------------------------------------------
// File layout: 8-byte magic "MOBINETC", uint64 little-endian index length L,
// L bytes of JSON index {"meta": ..., "tensors": {name: {"dtype": "f64le",
// "shape": [...], "offset": bytes, "count": k}}}, then the raw little-endian
// float64 data; offsets are relative to the start of the data section.

struct NamedTensor {
  std::string name;
  std::vector<Index> shape;
  Eigen::VectorXd values;
};

struct Checkpoint {
  std::string meta_json = "{}";
  std::vector<NamedTensor> tensors;

  const NamedTensor& at(const std::string& name) const;
  bool contains(const std::string& name) const;
};

void write_checkpoint(const std::filesystem::path& file, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& file);

}  // namespace mobinet::nn
