#include "mobinet/nn.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace mobinet::nn {

namespace {

// Unfolds one (C, H, W) image into a (C*K*K, Ho*Wo) matrix; row index is
// (c*K + kh)*K + kw, column index oh*Wo + ow.
void im2col(const double* img, Index channels, Index height, Index width, const ConvSpec& s,
            Index out_h, Index out_w, double* cols) {
  const Index k = s.kernel;
  const Index plane = out_h * out_w;
  for (Index c = 0; c < channels; ++c) {
    const double* src = img + c * height * width;
    for (Index kh = 0; kh < k; ++kh) {
      for (Index kw = 0; kw < k; ++kw) {
        double* row = cols + ((c * k + kh) * k + kw) * plane;
        for (Index oh = 0; oh < out_h; ++oh) {
          const Index ih = oh * s.stride - s.pad + kh;
          double* dst = row + oh * out_w;
          if (ih < 0 || ih >= height) {
            std::fill(dst, dst + out_w, 0.0);
            continue;
          }
          const double* line = src + ih * width;
          for (Index ow = 0; ow < out_w; ++ow) {
            const Index iw = ow * s.stride - s.pad + kw;
            dst[ow] = (iw >= 0 && iw < width) ? line[iw] : 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters-and-adds columns back into an image.
void col2im(const double* cols, Index channels, Index height, Index width, const ConvSpec& s,
            Index out_h, Index out_w, double* img) {
  const Index k = s.kernel;
  const Index plane = out_h * out_w;
  std::fill(img, img + channels * height * width, 0.0);
  for (Index c = 0; c < channels; ++c) {
    double* dst = img + c * height * width;
    for (Index kh = 0; kh < k; ++kh) {
      for (Index kw = 0; kw < k; ++kw) {
        const double* row = cols + ((c * k + kh) * k + kw) * plane;
        for (Index oh = 0; oh < out_h; ++oh) {
          const Index ih = oh * s.stride - s.pad + kh;
          if (ih < 0 || ih >= height) continue;
          double* line = dst + ih * width;
          const double* src = row + oh * out_w;
          for (Index ow = 0; ow < out_w; ++ow) {
            const Index iw = ow * s.stride - s.pad + kw;
            if (iw >= 0 && iw < width) line[iw] += src[ow];
          }
        }
      }
    }
  }
}

void check_spec(const ConvSpec& s, const char* who) {
  if (s.in_channels < 1 || s.out_channels < 1 || s.kernel < 1 || s.stride < 1 || s.pad < 0)
    throw InvalidInput(std::string(who) + ": invalid convolution hyperparameters");
}

void check_weights(const ConvSpec& s, const Eigen::VectorXd& weight, const Eigen::VectorXd& bias,
                   Index bias_len, const char* who) {
  if (weight.size() != s.in_channels * s.out_channels * s.kernel * s.kernel)
    throw InvalidInput(std::string(who) + ": weight has wrong size");
  if (bias.size() != 0 && bias.size() != bias_len)
    throw InvalidInput(std::string(who) + ": bias has wrong size");
}

Tensor4 map_elementwise(const Tensor4& x, auto&& f) {
  Tensor4 y(x.n(), x.c(), x.h(), x.w());
  const double* src = x.data();
  double* dst = y.data();
  for (Index i = 0; i < x.size(); ++i) dst[i] = f(src[i]);
  return y;
}

void require_same_shape(const Tensor4& a, const Tensor4& b, const char* who) {
  if (!a.same_shape(b))
    throw InvalidInput(std::string(who) + ": gradient shape " + shape_string(b) +
                       " does not match " + shape_string(a));
}

}  // namespace

Tensor4::Tensor4(Index n, Index c, Index h, Index w, double fill) : dims_{n, c, h, w} {
  if (n < 0 || c < 1 || h < 1 || w < 1) throw InvalidInput("Tensor4: dimensions must be positive");
  data_ = Eigen::VectorXd::Constant(n * c * h * w, fill);
}

std::string shape_string(const Tensor4& t) {
  return "(" + std::to_string(t.n()) + "," + std::to_string(t.c()) + "," + std::to_string(t.h()) +
         "," + std::to_string(t.w()) + ")";
}

Parameter::Parameter(std::string name_, std::vector<Index> shape_)
    : name(std::move(name_)), shape(std::move(shape_)) {
  Index count = 1;
  for (Index d : shape) count *= d;
  value = Eigen::VectorXd::Zero(count);
  grad = Eigen::VectorXd::Zero(count);
  adam_m = Eigen::VectorXd::Zero(count);
  adam_v = Eigen::VectorXd::Zero(count);
}

void adam_step(Parameter& p, const AdamConfig& cfg) {
  if (p.size() == 0) return;
  ++p.adam_step;
  p.adam_m = cfg.b1 * p.adam_m + (1.0 - cfg.b1) * p.grad;
  p.adam_v = cfg.b2 * p.adam_v + (1.0 - cfg.b2) * p.grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(cfg.b1, static_cast<double>(p.adam_step));
  const double c2 = 1.0 - std::pow(cfg.b2, static_cast<double>(p.adam_step));
  p.value.array() -=
      cfg.lr * (p.adam_m.array() / c1) / ((p.adam_v.array() / c2).sqrt() + cfg.eps);
}

Index conv_out_size(Index in, const ConvSpec& s) {
  const Index span = in + 2 * s.pad - s.kernel;
  if (span < 0) throw InvalidInput("convolution kernel does not fit the padded input");
  return span / s.stride + 1;
}

Index conv_transpose_out_size(Index in, const ConvSpec& s) {
  const Index out = (in - 1) * s.stride - 2 * s.pad + s.kernel;
  if (out < 1) throw InvalidInput("transposed convolution produces an empty output");
  return out;
}

Tensor4 conv2d_forward(const Tensor4& x, const ConvSpec& s, const Eigen::VectorXd& weight,
                       const Eigen::VectorXd& bias) {
  check_spec(s, "conv2d");
  check_weights(s, weight, bias, s.out_channels, "conv2d");
  if (x.c() != s.in_channels)
    throw InvalidInput("conv2d: input " + shape_string(x) + " has " + std::to_string(x.c()) +
                       " channels, layer expects " + std::to_string(s.in_channels));
  const Index oh = conv_out_size(x.h(), s);
  const Index ow = conv_out_size(x.w(), s);
  const Index ckk = s.in_channels * s.kernel * s.kernel;
  Tensor4 y(x.n(), s.out_channels, oh, ow);
  Eigen::Map<const RowMatrix> wm(weight.data(), s.out_channels, ckk);
  RowMatrix cols(ckk, oh * ow);
  for (Index n = 0; n < x.n(); ++n) {
    im2col(x.data() + n * x.c() * x.h() * x.w(), x.c(), x.h(), x.w(), s, oh, ow, cols.data());
    auto out = y.sample(n);
    out.noalias() = wm * cols;
    if (bias.size()) out.colwise() += bias;
  }
  return y;
}

Tensor4 conv2d_backward(const Tensor4& x, const ConvSpec& s, const Eigen::VectorXd& weight,
                        const Tensor4& grad_out, Eigen::VectorXd* grad_weight,
                        Eigen::VectorXd* grad_bias) {
  check_spec(s, "conv2d_backward");
  const Index oh = conv_out_size(x.h(), s);
  const Index ow = conv_out_size(x.w(), s);
  if (grad_out.n() != x.n() || grad_out.c() != s.out_channels || grad_out.h() != oh ||
      grad_out.w() != ow)
    throw InvalidInput("conv2d_backward: gradient shape " + shape_string(grad_out) +
                       " does not match the forward output");
  const Index ckk = s.in_channels * s.kernel * s.kernel;
  Eigen::Map<const RowMatrix> wm(weight.data(), s.out_channels, ckk);
  std::optional<Eigen::Map<RowMatrix>> gw;
  if (grad_weight) gw.emplace(grad_weight->data(), s.out_channels, ckk);

  Tensor4 gx(x.n(), x.c(), x.h(), x.w());
  RowMatrix cols(ckk, oh * ow);
  RowMatrix dcols(ckk, oh * ow);
  for (Index n = 0; n < x.n(); ++n) {
    const auto g = grad_out.sample(n);
    if (gw) {
      im2col(x.data() + n * x.c() * x.h() * x.w(), x.c(), x.h(), x.w(), s, oh, ow, cols.data());
      gw->noalias() += g * cols.transpose();
    }
    if (grad_bias) *grad_bias += g.rowwise().sum();
    dcols.noalias() = wm.transpose() * g;
    col2im(dcols.data(), x.c(), x.h(), x.w(), s, oh, ow, gx.data() + n * x.c() * x.h() * x.w());
  }
  return gx;
}

Tensor4 conv_transpose2d_forward(const Tensor4& x, const ConvSpec& s, const Eigen::VectorXd& weight,
                                 const Eigen::VectorXd& bias) {
  check_spec(s, "conv_transpose2d");
  check_weights(s, weight, bias, s.out_channels, "conv_transpose2d");
  if (x.c() != s.in_channels)
    throw InvalidInput("conv_transpose2d: input " + shape_string(x) + " has " +
                       std::to_string(x.c()) + " channels, layer expects " +
                       std::to_string(s.in_channels));
  const Index oh = conv_transpose_out_size(x.h(), s);
  const Index ow = conv_transpose_out_size(x.w(), s);
  const Index ckk = s.out_channels * s.kernel * s.kernel;
  Tensor4 y(x.n(), s.out_channels, oh, ow);
  Eigen::Map<const RowMatrix> wm(weight.data(), s.in_channels, ckk);
  RowMatrix cols(ckk, x.h() * x.w());
  for (Index n = 0; n < x.n(); ++n) {
    cols.noalias() = wm.transpose() * x.sample(n);
    col2im(cols.data(), s.out_channels, oh, ow, s, x.h(), x.w(),
           y.data() + n * s.out_channels * oh * ow);
    if (bias.size()) y.sample(n).colwise() += bias;
  }
  return y;
}

Tensor4 conv_transpose2d_backward(const Tensor4& x, const ConvSpec& s,
                                  const Eigen::VectorXd& weight, const Tensor4& grad_out,
                                  Eigen::VectorXd* grad_weight, Eigen::VectorXd* grad_bias) {
  check_spec(s, "conv_transpose2d_backward");
  const Index oh = conv_transpose_out_size(x.h(), s);
  const Index ow = conv_transpose_out_size(x.w(), s);
  if (grad_out.n() != x.n() || grad_out.c() != s.out_channels || grad_out.h() != oh ||
      grad_out.w() != ow)
    throw InvalidInput("conv_transpose2d_backward: gradient shape " + shape_string(grad_out) +
                       " does not match the forward output");
  const Index ckk = s.out_channels * s.kernel * s.kernel;
  Eigen::Map<const RowMatrix> wm(weight.data(), s.in_channels, ckk);
  std::optional<Eigen::Map<RowMatrix>> gw;
  if (grad_weight) gw.emplace(grad_weight->data(), s.in_channels, ckk);

  Tensor4 gx(x.n(), x.c(), x.h(), x.w());
  RowMatrix cols(ckk, x.h() * x.w());
  for (Index n = 0; n < x.n(); ++n) {
    im2col(grad_out.data() + n * s.out_channels * oh * ow, s.out_channels, oh, ow, s, x.h(),
           x.w(), cols.data());
    gx.sample(n).noalias() = wm * cols;
    if (gw) gw->noalias() += x.sample(n) * cols.transpose();
    if (grad_bias) *grad_bias += grad_out.sample(n).rowwise().sum();
  }
  return gx;
}

Tensor4 batchnorm2d_forward(const Tensor4& x, const Eigen::VectorXd& gamma,
                            const Eigen::VectorXd& beta, BatchNormStats& stats, Mode mode,
                            double momentum, double eps, BatchNormCache* cache) {
  const Index channels = x.c();
  if (gamma.size() != channels || beta.size() != channels ||
      stats.running_mean.size() != channels || stats.running_var.size() != channels)
    throw InvalidInput("batchnorm2d: parameter size does not match " + std::to_string(channels) +
                       " channels");
  const Index plane = x.h() * x.w();
  const Index count = x.n() * plane;
  if (mode == Mode::kTrain && count < 2)
    throw InvalidInput("batchnorm2d: training mode needs at least two values per channel");

  Tensor4 y(x.n(), x.c(), x.h(), x.w());
  Tensor4 xhat(x.n(), x.c(), x.h(), x.w());
  Eigen::VectorXd inv_std(channels);
  for (Index c = 0; c < channels; ++c) {
    double mean = 0.0;
    double var = 0.0;
    if (mode == Mode::kTrain) {
      for (Index n = 0; n < x.n(); ++n) mean += x.sample(n).row(c).sum();
      mean /= static_cast<double>(count);
      for (Index n = 0; n < x.n(); ++n)
        var += (x.sample(n).row(c).array() - mean).square().sum();
      var /= static_cast<double>(count);
      stats.running_mean(c) = (1.0 - momentum) * stats.running_mean(c) + momentum * mean;
      stats.running_var(c) = (1.0 - momentum) * stats.running_var(c) +
                             momentum * var * static_cast<double>(count) / (count - 1);
    } else {
      mean = stats.running_mean(c);
      var = stats.running_var(c);
    }
    inv_std(c) = 1.0 / std::sqrt(var + eps);
    for (Index n = 0; n < x.n(); ++n) {
      auto xh = xhat.sample(n).row(c);
      xh = (x.sample(n).row(c).array() - mean) * inv_std(c);
      y.sample(n).row(c) = (xh.array() * gamma(c) + beta(c)).matrix();
    }
  }
  if (cache) {
    cache->mode = mode;
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Tensor4 batchnorm2d_backward(const Tensor4& grad_out, const Eigen::VectorXd& gamma,
                             const BatchNormCache& cache, Eigen::VectorXd* grad_gamma,
                             Eigen::VectorXd* grad_beta) {
  require_same_shape(cache.xhat, grad_out, "batchnorm2d_backward");
  const Index channels = grad_out.c();
  const double count = static_cast<double>(grad_out.n() * grad_out.h() * grad_out.w());
  Tensor4 gx(grad_out.n(), grad_out.c(), grad_out.h(), grad_out.w());
  for (Index c = 0; c < channels; ++c) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (Index n = 0; n < grad_out.n(); ++n) {
      const auto dy = grad_out.sample(n).row(c);
      sum_dy += dy.sum();
      sum_dy_xhat += dy.dot(cache.xhat.sample(n).row(c));
    }
    if (grad_gamma) (*grad_gamma)(c) += sum_dy_xhat;
    if (grad_beta) (*grad_beta)(c) += sum_dy;
    const double scale = gamma(c) * cache.inv_std(c);
    for (Index n = 0; n < grad_out.n(); ++n) {
      const auto dy = grad_out.sample(n).row(c).array();
      if (cache.mode == Mode::kTrain) {
        const auto xh = cache.xhat.sample(n).row(c).array();
        gx.sample(n).row(c) = (scale / count * (count * dy - sum_dy - xh * sum_dy_xhat)).matrix();
      } else {
        gx.sample(n).row(c) = (scale * dy).matrix();
      }
    }
  }
  return gx;
}

Tensor4 relu(const Tensor4& x) {
  return map_elementwise(x, [](double v) { return v > 0.0 ? v : 0.0; });
}

Tensor4 relu_backward(const Tensor4& x, const Tensor4& grad_out) {
  require_same_shape(x, grad_out, "relu_backward");
  Tensor4 g(x.n(), x.c(), x.h(), x.w());
  for (Index i = 0; i < x.size(); ++i) g.data()[i] = x.data()[i] > 0.0 ? grad_out.data()[i] : 0.0;
  return g;
}

Tensor4 leaky_relu(const Tensor4& x, double slope) {
  return map_elementwise(x, [slope](double v) { return v > 0.0 ? v : slope * v; });
}

Tensor4 leaky_relu_backward(const Tensor4& x, const Tensor4& grad_out, double slope) {
  require_same_shape(x, grad_out, "leaky_relu_backward");
  Tensor4 g(x.n(), x.c(), x.h(), x.w());
  for (Index i = 0; i < x.size(); ++i)
    g.data()[i] = x.data()[i] > 0.0 ? grad_out.data()[i] : slope * grad_out.data()[i];
  return g;
}

Tensor4 sigmoid(const Tensor4& x) {
  return map_elementwise(x, [](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

Tensor4 sigmoid_backward(const Tensor4& y, const Tensor4& grad_out) {
  require_same_shape(y, grad_out, "sigmoid_backward");
  Tensor4 g(y.n(), y.c(), y.h(), y.w());
  for (Index i = 0; i < y.size(); ++i) {
    const double s = y.data()[i];
    g.data()[i] = grad_out.data()[i] * s * (1.0 - s);
  }
  return g;
}

double bce_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty())
    throw InvalidInput("bce_loss: prediction and target sizes differ or are empty");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(pred[i], kBceClamp, 1.0 - kBceClamp);
    total -= target[i] * std::log(p) + (1.0 - target[i]) * std::log(1.0 - p);
  }
  return total / static_cast<double>(pred.size());
}

Eigen::VectorXd bce_backward(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty())
    throw InvalidInput("bce_backward: prediction and target sizes differ or are empty");
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  Eigen::VectorXd g(static_cast<Index>(pred.size()));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(pred[i], kBceClamp, 1.0 - kBceClamp);
    g(static_cast<Index>(i)) = (p - target[i]) / (p * (1.0 - p)) * inv_n;
  }
  return g;
}

// ---- layers ----------------------------------------------------------------

Conv2d::Conv2d(const ConvSpec& spec, bool bias)
    : spec_(spec),
      weight_("weight", {spec.out_channels, spec.in_channels, spec.kernel, spec.kernel}),
      bias_("bias", {bias ? spec.out_channels : 0}) {
  check_spec(spec, "Conv2d");
}

Tensor4 Conv2d::forward(const Tensor4& x, Mode) {
  input_ = x;
  return conv2d_forward(x, spec_, weight_.value, bias_.value);
}

Tensor4 Conv2d::backward(const Tensor4& grad_out, bool param_grads) {
  return conv2d_backward(input_, spec_, weight_.value, grad_out,
                         param_grads ? &weight_.grad : nullptr,
                         param_grads && bias_.size() ? &bias_.grad : nullptr);
}

std::vector<Parameter*> Conv2d::parameters() {
  if (bias_.size()) return {&weight_, &bias_};
  return {&weight_};
}

std::string Conv2d::describe() const {
  return "Conv2d(" + std::to_string(spec_.in_channels) + "->" + std::to_string(spec_.out_channels) +
         ", k=" + std::to_string(spec_.kernel) + ", s=" + std::to_string(spec_.stride) +
         ", p=" + std::to_string(spec_.pad) + ")";
}

ConvTranspose2d::ConvTranspose2d(const ConvSpec& spec, bool bias)
    : spec_(spec),
      weight_("weight", {spec.in_channels, spec.out_channels, spec.kernel, spec.kernel}),
      bias_("bias", {bias ? spec.out_channels : 0}) {
  check_spec(spec, "ConvTranspose2d");
}

Tensor4 ConvTranspose2d::forward(const Tensor4& x, Mode) {
  input_ = x;
  return conv_transpose2d_forward(x, spec_, weight_.value, bias_.value);
}

Tensor4 ConvTranspose2d::backward(const Tensor4& grad_out, bool param_grads) {
  return conv_transpose2d_backward(input_, spec_, weight_.value, grad_out,
                                   param_grads ? &weight_.grad : nullptr,
                                   param_grads && bias_.size() ? &bias_.grad : nullptr);
}

std::vector<Parameter*> ConvTranspose2d::parameters() {
  if (bias_.size()) return {&weight_, &bias_};
  return {&weight_};
}

std::string ConvTranspose2d::describe() const {
  return "ConvTranspose2d(" + std::to_string(spec_.in_channels) + "->" +
         std::to_string(spec_.out_channels) + ", k=" + std::to_string(spec_.kernel) +
         ", s=" + std::to_string(spec_.stride) + ", p=" + std::to_string(spec_.pad) + ")";
}

BatchNorm2d::BatchNorm2d(Index channels, double momentum, double eps)
    : momentum_(momentum), eps_(eps), gamma_("gamma", {channels}), beta_("beta", {channels}) {
  gamma_.value.setOnes();
  stats_.running_mean = Eigen::VectorXd::Zero(channels);
  stats_.running_var = Eigen::VectorXd::Ones(channels);
}

Tensor4 BatchNorm2d::forward(const Tensor4& x, Mode mode) {
  return batchnorm2d_forward(x, gamma_.value, beta_.value, stats_, mode, momentum_, eps_, &cache_);
}

Tensor4 BatchNorm2d::backward(const Tensor4& grad_out, bool param_grads) {
  return batchnorm2d_backward(grad_out, gamma_.value, cache_, param_grads ? &gamma_.grad : nullptr,
                              param_grads ? &beta_.grad : nullptr);
}

std::vector<std::pair<std::string, Eigen::VectorXd*>> BatchNorm2d::buffers() {
  return {{"running_mean", &stats_.running_mean}, {"running_var", &stats_.running_var}};
}

std::string BatchNorm2d::describe() const {
  return "BatchNorm2d(" + std::to_string(gamma_.size()) + ")";
}

Tensor4 ReLU::forward(const Tensor4& x, Mode) {
  input_ = x;
  return relu(x);
}

Tensor4 ReLU::backward(const Tensor4& grad_out, bool) { return relu_backward(input_, grad_out); }

Tensor4 LeakyReLU::forward(const Tensor4& x, Mode) {
  input_ = x;
  return leaky_relu(x, slope_);
}

Tensor4 LeakyReLU::backward(const Tensor4& grad_out, bool) {
  return leaky_relu_backward(input_, grad_out, slope_);
}

std::string LeakyReLU::describe() const { return "LeakyReLU(" + std::to_string(slope_) + ")"; }

Tensor4 Sigmoid::forward(const Tensor4& x, Mode) {
  output_ = sigmoid(x);
  return output_;
}

Tensor4 Sigmoid::backward(const Tensor4& grad_out, bool) {
  return sigmoid_backward(output_, grad_out);
}

Tensor4 Sequential::forward(const Tensor4& x, Mode mode) {
  Tensor4 h = x;
  for (auto& layer : layers_) h = layer->forward(h, mode);
  return h;
}

Tensor4 Sequential::backward(const Tensor4& grad_out, bool param_grads) {
  Tensor4 g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g, param_grads);
  return g;
}

std::vector<Parameter*> Sequential::parameters() {
  std::vector<Parameter*> out;
  for (std::size_t k = 0; k < layers_.size(); ++k)
    for (Parameter* p : layers_[k]->parameters()) {
      const auto dot = p->name.find('.');
      const std::string base = dot == std::string::npos ? p->name : p->name.substr(dot + 1);
      p->name = std::to_string(k) + "." + base;
      out.push_back(p);
    }
  return out;
}

std::vector<std::pair<std::string, Eigen::VectorXd*>> Sequential::buffers() {
  std::vector<std::pair<std::string, Eigen::VectorXd*>> out;
  for (std::size_t k = 0; k < layers_.size(); ++k)
    for (auto& [name, buf] : layers_[k]->buffers())
      out.emplace_back(std::to_string(k) + "." + name, buf);
  return out;
}

void Sequential::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

void Sequential::adam_step(const AdamConfig& cfg) {
  for (Parameter* p : parameters()) nn::adam_step(*p, cfg);
}

void init_dcgan(Sequential& net, Rng& rng) {
  std::normal_distribution<double> noise(0.0, 0.02);
  for (std::size_t k = 0; k < net.size(); ++k) {
    Layer& layer = net.layer(k);
    if (auto* conv = dynamic_cast<Conv2d*>(&layer)) {
      for (Index i = 0; i < conv->weight().size(); ++i) conv->weight().value(i) = noise(rng);
      conv->bias().value.setZero();
    } else if (auto* convt = dynamic_cast<ConvTranspose2d*>(&layer)) {
      for (Index i = 0; i < convt->weight().size(); ++i) convt->weight().value(i) = noise(rng);
      convt->bias().value.setZero();
    } else if (auto* bn = dynamic_cast<BatchNorm2d*>(&layer)) {
      for (Index i = 0; i < bn->gamma().size(); ++i) bn->gamma().value(i) = 1.0 + noise(rng);
      bn->beta().value.setZero();
    }
  }
}

}  // namespace mobinet::nn
