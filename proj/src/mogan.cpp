#include "mobinet/mogan.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace mobinet {

using nn::Mode;
using nn::Tensor4;

std::string GanConfig::to_json() const {
  return nlohmann::json{{"latent_dim", latent_dim},
                        {"epochs", epochs},
                        {"batch_size", batch_size},
                        {"lr", lr},
                        {"b1", b1},
                        {"b2", b2},
                        {"seed", seed},
                        {"feature_maps", feature_maps},
                        {"log1p_scaling", log1p_scaling},
                        {"early_stop", early_stop},
                        {"early_stop_tolerance", early_stop_tolerance},
                        {"early_stop_window", early_stop_window}}
      .dump();
}

GanConfig GanConfig::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    GanConfig c;
    c.latent_dim = j.at("latent_dim").get<Index>();
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<Index>();
    c.lr = j.at("lr").get<double>();
    c.b1 = j.at("b1").get<double>();
    c.b2 = j.at("b2").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.feature_maps = j.at("feature_maps").get<Index>();
    c.log1p_scaling = j.value("log1p_scaling", false);
    c.early_stop = j.value("early_stop", false);
    c.early_stop_tolerance = j.value("early_stop_tolerance", 0.05);
    c.early_stop_window = j.value("early_stop_window", 200);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("GAN config: ") + e.what());
  }
}

namespace {

void validate(const GanConfig& cfg) {
  if (cfg.latent_dim < 1 || cfg.epochs < 1 || cfg.batch_size < 1 || cfg.feature_maps < 1 ||
      !(cfg.lr > 0.0) || !(cfg.b1 >= 0.0 && cfg.b1 < 1.0) || !(cfg.b2 >= 0.0 && cfg.b2 < 1.0))
    throw ConfigError("GAN config: all sizes and rates must be positive, betas in [0, 1)");
}

nn::AdamConfig adam_of(const GanConfig& cfg) { return {cfg.lr, cfg.b1, cfg.b2, 1e-8}; }

void save_sequential(nn::Sequential& net, const std::string& prefix, nn::Checkpoint& ckpt) {
  for (nn::Parameter* p : net.parameters()) {
    const std::string base = prefix + "." + p->name;
    ckpt.tensors.push_back({base, p->shape, p->value});
    ckpt.tensors.push_back({base + ".adam_m", p->shape, p->adam_m});
    ckpt.tensors.push_back({base + ".adam_v", p->shape, p->adam_v});
    ckpt.tensors.push_back(
        {base + ".adam_step", {1}, Eigen::VectorXd::Constant(1, static_cast<double>(p->adam_step))});
  }
  for (auto& [name, buf] : net.buffers())
    ckpt.tensors.push_back({prefix + "." + name, {buf->size()}, *buf});
}

void load_sequential(nn::Sequential& net, const std::string& prefix, const nn::Checkpoint& ckpt) {
  auto fetch = [&](const std::string& name, Index size) -> const Eigen::VectorXd& {
    const auto& t = ckpt.at(name);
    if (t.values.size() != size)
      throw IoError("checkpoint tensor '" + name + "' has " + std::to_string(t.values.size()) +
                    " values, model expects " + std::to_string(size));
    return t.values;
  };
  for (nn::Parameter* p : net.parameters()) {
    const std::string base = prefix + "." + p->name;
    p->value = fetch(base, p->size());
    if (ckpt.contains(base + ".adam_m")) {
      p->adam_m = fetch(base + ".adam_m", p->size());
      p->adam_v = fetch(base + ".adam_v", p->size());
      p->adam_step = static_cast<long long>(fetch(base + ".adam_step", 1)(0));
    }
  }
  for (auto& [name, buf] : net.buffers()) *buf = fetch(prefix + "." + name, buf->size());
}

Tensor4 gaussian_latent(Index n, Index dim, Rng& rng) {
  Tensor4 z(n, dim, 1, 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index i = 0; i < z.size(); ++i) z.data()[i] = normal(rng);
  return z;
}

std::span<const double> view(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

Tensor4 to_tensor(const Eigen::VectorXd& v) {
  Tensor4 t(v.size(), 1, 1, 1);
  t.flat() = v;
  return t;
}

}  // namespace

nn::Sequential build_generator(const GanConfig& cfg) {
  validate(cfg);
  const Index f = cfg.feature_maps;
  nn::Sequential g;
  const Index widths[] = {cfg.latent_dim, 8 * f, 4 * f, 2 * f, f, 1};
  const Index strides[] = {1, 2, 2, 2, 2};
  const Index pads[] = {0, 1, 1, 1, 1};
  Index side = 1;
  for (int stage = 0; stage < 5; ++stage) {
    const nn::ConvSpec spec{widths[stage], widths[stage + 1], 4, strides[stage], pads[stage]};
    const bool last = stage == 4;
    g.add<nn::ConvTranspose2d>(spec, last);
    side = nn::conv_transpose_out_size(side, spec);
    if (!last) g.add<nn::BatchNorm2d>(widths[stage + 1]);
    g.add<nn::ReLU>();
  }
  if (side != kGanImageSize)
    throw InvalidInput("generator layer plan produces " + std::to_string(side) + "x" +
                       std::to_string(side) + " instead of 64x64");
  return g;
}

nn::Sequential build_discriminator(const GanConfig& cfg) {
  validate(cfg);
  const Index f = cfg.feature_maps;
  nn::Sequential d;
  const Index widths[] = {1, f, 2 * f, 4 * f, 8 * f, 1};
  const Index strides[] = {2, 2, 2, 2, 1};
  const Index pads[] = {1, 1, 1, 1, 0};
  Index side = kGanImageSize;
  for (int stage = 0; stage < 5; ++stage) {
    const nn::ConvSpec spec{widths[stage], widths[stage + 1], 4, strides[stage], pads[stage]};
    const bool normalized = stage >= 1 && stage <= 3;
    d.add<nn::Conv2d>(spec, !normalized);
    side = nn::conv_out_size(side, spec);
    if (stage == 4) {
      d.add<nn::Sigmoid>();
    } else {
      if (normalized) d.add<nn::BatchNorm2d>(widths[stage + 1]);
      d.add<nn::LeakyReLU>(0.2);
    }
  }
  if (side != 1) throw InvalidInput("discriminator layer plan does not reduce 64x64 to a scalar");
  return d;
}

GanModel::GanModel(const GanConfig& cfg)
    : config_(cfg), generator_(build_generator(cfg)), discriminator_(build_discriminator(cfg)) {
  Rng rng = make_rng(cfg.seed, "gan-init");
  nn::init_dcgan(generator_, rng);
  nn::init_dcgan(discriminator_, rng);
}

Eigen::VectorXd GanModel::discriminate(const Tensor4& x, Mode mode) {
  if (x.c() != 1 || x.h() != kGanImageSize || x.w() != kGanImageSize)
    throw InvalidInput("discriminator expects (N,1,64,64) input, got " + nn::shape_string(x));
  return discriminator_.forward(x, mode).flat();
}

void GanModel::save(const std::filesystem::path& file) {
  nn::Checkpoint ckpt;
  ckpt.meta_json = nlohmann::json{{"model", "mogan"},
                                  {"config", nlohmann::json::parse(config_.to_json())}}
                       .dump();
  save_sequential(generator_, "generator", ckpt);
  save_sequential(discriminator_, "discriminator", ckpt);
  nn::write_checkpoint(file, ckpt);
}

GanModel GanModel::load(const std::filesystem::path& file) {
  const nn::Checkpoint ckpt = nn::read_checkpoint(file);
  const auto meta = nlohmann::json::parse(ckpt.meta_json);
  if (!meta.contains("config")) throw IoError(file.string() + ": checkpoint has no GAN config");
  GanModel model(GanConfig::from_json(meta["config"].dump()));
  load_sequential(model.generator_, "generator", ckpt);
  load_sequential(model.discriminator_, "discriminator", ckpt);
  return model;
}

void TrainingHistory::write_csv(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write training history " + file.string());
  out << "iteration,g_loss,d_loss,real_score,fake_score\n";
  for (const auto& r : records)
    out << r.iteration << ',' << format_double(r.g_loss) << ',' << format_double(r.d_loss) << ','
        << format_double(r.real_score) << ',' << format_double(r.fake_score) << '\n';
}

Tensor4 pack_networks(std::span<const MobilityNetwork> nets, bool log1p_scaling) {
  if (nets.empty()) throw InvalidInput("pack_networks: empty set");
  const Index n = nets.front().n();
  Tensor4 t(static_cast<Index>(nets.size()), 1, n, n);
  for (std::size_t k = 0; k < nets.size(); ++k) {
    if (nets[k].n() != n) throw InvalidInput("pack_networks: inconsistent node counts");
    Eigen::Map<FlowMatrix> dst(t.data() + static_cast<Index>(k) * n * n, n, n);
    dst = nets[k].weights();
    if (log1p_scaling) dst = dst.array().log1p().matrix();
  }
  return t;
}

TrainingRecord train_step(GanModel& model, const Tensor4& reals, Rng& rng, long long iteration,
                          int epoch) {
  const GanConfig& cfg = model.config();
  const Index b = reals.n();
  const std::vector<double> valid(static_cast<std::size_t>(b), 1.0);
  const std::vector<double> synthetic(static_cast<std::size_t>(b), 0.0);
  const nn::AdamConfig adam = adam_of(cfg);
  auto& gen = model.generator();
  auto& disc = model.discriminator();

  TrainingRecord rec;
  rec.iteration = iteration;
  rec.epoch = epoch;

  // Generator update.
  gen.zero_grad();
  const Tensor4 z = gaussian_latent(b, cfg.latent_dim, rng);
  const Tensor4 fakes = gen.forward(z, Mode::kTrain);
  {
    const Eigen::VectorXd out = model.discriminate(fakes, Mode::kTrain);
    rec.g_loss = nn::bce_loss(view(out), valid);
    const Tensor4 d_fakes = disc.backward(to_tensor(nn::bce_backward(view(out), valid)), false);
    gen.backward(d_fakes);
    gen.adam_step(adam);
  }

  // Discriminator update on reals and the detached fakes.
  disc.zero_grad();
  {
    const Eigen::VectorXd out = model.discriminate(reals, Mode::kTrain);
    rec.d_loss_real = nn::bce_loss(view(out), valid);
    rec.real_score = out.mean();
    disc.backward(to_tensor(0.5 * nn::bce_backward(view(out), valid)));
  }
  {
    const Eigen::VectorXd out = model.discriminate(fakes, Mode::kTrain);
    rec.d_loss_fake = nn::bce_loss(view(out), synthetic);
    rec.fake_score = out.mean();
    disc.backward(to_tensor(0.5 * nn::bce_backward(view(out), synthetic)));
  }
  rec.d_loss = 0.5 * (rec.d_loss_real + rec.d_loss_fake);
  disc.adam_step(adam);
  return rec;
}

std::pair<GanModel, TrainingHistory> train(std::span<const MobilityNetwork> train_set,
                                           const GanConfig& cfg, const SnapshotHook& hook) {
  validate(cfg);
  if (train_set.empty()) throw ConfigError("train: empty training set");
  const Index size = static_cast<Index>(train_set.size());
  if (size % cfg.batch_size != 0)
    throw ConfigError("train: batch size " + std::to_string(cfg.batch_size) +
                      " does not divide the training set size " + std::to_string(size));
  for (const auto& net : train_set)
    if (net.n() != kGanImageSize)
      throw ConfigError("train: network '" + net.date() + "' has " + std::to_string(net.n()) +
                        " nodes, the generator produces 64");

  GanModel model(cfg);
  TrainingHistory history;
  const Index batches = size / cfg.batch_size;
  history.records.reserve(static_cast<std::size_t>(cfg.epochs * batches));
  const Tensor4 data = pack_networks(train_set, cfg.log1p_scaling);
  const Index plane = kGanImageSize * kGanImageSize;

  Rng rng = make_rng(cfg.seed, "gan-train");
  std::vector<Index> order(static_cast<std::size_t>(size));
  std::iota(order.begin(), order.end(), Index{0});
  const int snapshot_every = std::max(1, cfg.epochs / 10);
  Tensor4 batch(cfg.batch_size, 1, kGanImageSize, kGanImageSize);
  long long iteration = 0;
  int calm = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Index bidx = 0; bidx < batches; ++bidx) {
      for (Index k = 0; k < cfg.batch_size; ++k)
        std::copy_n(data.data() + order[static_cast<std::size_t>(bidx * cfg.batch_size + k)] * plane,
                    plane, batch.data() + k * plane);
      const TrainingRecord rec = train_step(model, batch, rng, iteration++, epoch);
      history.records.push_back(rec);
      const bool settled = std::abs(rec.real_score - 0.5) < cfg.early_stop_tolerance &&
                           std::abs(rec.fake_score - 0.5) < cfg.early_stop_tolerance;
      calm = settled ? calm + 1 : 0;
    }
    if (hook && (epoch == 1 || epoch % snapshot_every == 0)) hook(epoch, model);
    if (cfg.early_stop && calm >= cfg.early_stop_window) break;
  }
  return {std::move(model), std::move(history)};
}

std::vector<MobilityNetwork> sample(GanModel& model, Index k, std::uint64_t seed,
                                    bool round_to_integers, const std::string& prefix) {
  std::vector<MobilityNetwork> out;
  if (k <= 0) return out;
  out.reserve(static_cast<std::size_t>(k));
  Rng rng = make_rng(seed, "gan-sample");
  const Tensor4 z = gaussian_latent(k, model.config().latent_dim, rng);
  constexpr Index kChunk = 32;
  const Index latent = model.config().latent_dim;
  for (Index start = 0; start < k; start += kChunk) {
    const Index count = std::min(kChunk, k - start);
    Tensor4 zc(count, latent, 1, 1);
    std::copy_n(z.data() + start * latent, count * latent, zc.data());
    const Tensor4 y = model.generator().forward(zc, Mode::kEval);
    for (Index s = 0; s < count; ++s) {
      FlowMatrix w = Eigen::Map<const FlowMatrix>(y.data() + s * y.h() * y.w(), y.h(), y.w());
      if (model.config().log1p_scaling) w = w.array().expm1().matrix();
      w = w.cwiseMax(0.0);
      if (round_to_integers) w = w.array().round().matrix();
      char name[32];
      std::snprintf(name, sizeof name, "-%04lld", static_cast<long long>(start + s + 1));
      out.emplace_back(prefix + name, std::move(w));
    }
  }
  return out;
}

}  // namespace mobinet
