#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mobinet/netcore.hpp"
#include "mobinet/nn.hpp"

namespace mobinet {

struct GanConfig {
  Index latent_dim = 100;
  int epochs = 6000;
  Index batch_size = 146;
  double lr = 0.0002;
  double b1 = 0.5;
  double b2 = 0.999;
  std::uint64_t seed = 0;
  /// Base channel width; 64 gives the 512/256/128/64 plan.
  Index feature_maps = 64;
  /// Train on log1p(flows) and invert with expm1 when sampling.
  bool log1p_scaling = false;
  /// Stop once both scores stay within tolerance of 0.5 for `window`
  /// consecutive iterations.
  bool early_stop = false;
  double early_stop_tolerance = 0.05;
  int early_stop_window = 200;

  std::string to_json() const;
  static GanConfig from_json(const std::string& text);
};

inline constexpr Index kGanImageSize = 64;

/// latent (N, latent_dim, 1, 1) -> (N, 1, 64, 64). Five transposed
/// convolutions (kernel 4; strides 1,2,2,2,2; pads 0,1,1,1,1) with widths
/// 8f, 4f, 2f, f, 1; batch norm + ReLU after each hidden stage and a final
/// ReLU so generated flows are nonnegative.
nn::Sequential build_generator(const GanConfig& cfg);

/// (N, 1, 64, 64) -> (N, 1, 1, 1) probabilities. Five convolutions (kernel 4;
/// strides 2,2,2,2,1; pads 1,1,1,1,0) with widths f, 2f, 4f, 8f, 1;
/// LeakyReLU(0.2) on hidden stages, batch norm on stages 2-4, sigmoid output.
nn::Sequential build_discriminator(const GanConfig& cfg);

class GanModel {
 public:
  /// Builds both networks and initializes them from cfg.seed.
  explicit GanModel(const GanConfig& cfg);

  const GanConfig& config() const { return config_; }
  nn::Sequential& generator() { return generator_; }
  nn::Sequential& discriminator() { return discriminator_; }

  /// Discriminator probabilities, one per sample. Input must be (N, 1, 64, 64).
  Eigen::VectorXd discriminate(const nn::Tensor4& x, nn::Mode mode);

  void save(const std::filesystem::path& file);
  static GanModel load(const std::filesystem::path& file);

 private:
  GanConfig config_;
  nn::Sequential generator_;
  nn::Sequential discriminator_;
};

struct TrainingRecord {
  long long iteration = 0;
  int epoch = 0;
  double g_loss = 0.0;
  double d_loss = 0.0;
  double d_loss_real = 0.0;
  double d_loss_fake = 0.0;
  double real_score = 0.0;
  double fake_score = 0.0;
};

struct TrainingHistory {
  std::vector<TrainingRecord> records;

  /// iteration,g_loss,d_loss,real_score,fake_score
  void write_csv(const std::filesystem::path& file) const;
};

/// Called after epoch `epoch` (1-based) at the first epoch and every 10% of
/// the budget; used for periodic sample dumps.
using SnapshotHook = std::function<void(int epoch, GanModel& model)>;

/// Adversarial training. Per epoch the training set is shuffled and split into
/// equal minibatches; per minibatch: zero G grads, generate fakes,
/// G loss = BCE(D(fakes), 1), update G, zero D grads,
/// D loss = (BCE(D(reals), 1) + BCE(D(fakes detached), 0)) / 2, update D.
std::pair<GanModel, TrainingHistory> train(std::span<const MobilityNetwork> train_set,
                                           const GanConfig& cfg, const SnapshotHook& hook = {});

/// Runs a single training iteration on the given real minibatch; exposed so
/// the loop's individual steps can be tested.
TrainingRecord train_step(GanModel& model, const nn::Tensor4& reals, Rng& rng,
                          long long iteration = 0, int epoch = 0);

/// Packs networks into an (N, 1, n, n) tensor, applying log1p when configured.
nn::Tensor4 pack_networks(std::span<const MobilityNetwork> nets, bool log1p_scaling);

/// k networks from independent standard-normal latents, batch norm in EVAL
/// mode. Dates are "<prefix>-0001", ...
std::vector<MobilityNetwork> sample(GanModel& model, Index k, std::uint64_t seed,
                                    bool round_to_integers = false,
                                    const std::string& prefix = "mogan");

}  // namespace mobinet
