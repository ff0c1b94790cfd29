#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "fovrec/image.hpp"
#include "fovrec/losses.hpp"
#include "fovrec/manifest.hpp"
#include "fovrec/networks.hpp"

namespace fovrec {

enum class ReconTerm { kL2, kLpips, kLaplacian };
enum class AdvMode { kStandard, kOurs };

struct LossVariant {
  ReconTerm recon = ReconTerm::kL2;
  AdvMode adv = AdvMode::kStandard;
  int lapl_peak = 0;  // pyramid level carrying the largest weight (Laplacian only)

  std::string name() const;  // e.g. "l2", "lpips*", "lapl-M*"
};

// All six combinations of reconstruction term and critic data source.
std::vector<LossVariant> all_loss_variants(int lapl_peak = 0);

// Inverse of LossVariant::name(); also accepts "lapl-H" and "lapl-M".
LossVariant parse_loss_variant(const std::string& name);
ReconTerm parse_recon_term(const std::string& s);
AdvMode parse_adv_mode(const std::string& s);
std::string to_string(ReconTerm t);
std::string to_string(AdvMode m);
// "H" is the finest level, "M" the fourth.
int peak_level_from_letter(char letter);

struct LossWeights {
  double l2 = 2000.0;
  double lpips = 100.0;
  double lapl = 100.0;
  double adv = 1.0;
};

struct TrainConfig {
  double lr = 2e-5;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  LossVariant variant;
  LossWeights weights;
  int lapl_levels = 5;
  double lapl_sigma = 1.0;
  double gp_weight = 10.0;
  int n_critic = 5;
  int batch_size = 16;
  int max_epochs = 100;
  int max_steps = 0;       // generator steps; 0 = limited by epochs only
  int steps_per_epoch = 0; // 0 = ceil(pairs / batch_size)
  std::string region = "near";
  double critic_mix = 0.5; // share of distorted patches among critic targets ("ours")
  bool stop_on_plateau = true;
  int plateau_window = 200;
  double plateau_tol = 1e-3;
  GeneratorSpec generator;
  CriticSpec critic;
  std::uint64_t seed = 0;

  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

struct GeneratorLoss {
  torch::Tensor total;
  torch::Tensor recon;  // unweighted reconstruction term
  torch::Tensor adv;    // unweighted adversarial term, -mean D(G(z))
};

// Loss for generator outputs and targets in [-1, 1]. Reconstruction terms
// are evaluated on the unit-range versions. critic_score holds D(G(z)) per
// sample; pass an undefined tensor to drop the adversarial term.
GeneratorLoss generator_loss(const LossVariant& variant, const torch::Tensor& recon,
                             const torch::Tensor& target, const torch::Tensor& critic_score,
                             const TrainConfig& cfg);

struct HistoryRow {
  int step = 0;
  double critic_loss = 0.0;  // mean D(target) - mean D(fake)
  double gen_loss = 0.0;
  double gp = 0.0;
  double recon_term = 0.0;
  double grad_norm = 0.0;    // mean gradient norm at the penalty interpolates
};

// Generator inputs, their ground truths and the critic's target pool, all
// N x 3 x H x W in [-1, 1].
struct TrainingData {
  torch::Tensor inputs;
  torch::Tensor truths;
  torch::Tensor critic_distorted;  // may be empty
  torch::Tensor critic_natural;
  std::vector<std::string> critic_sources;  // manifest kind of every critic patch
};

// Standard mode draws critic targets from the generator's ground truths;
// "ours" mode uses the critic manifest of the same region, distorted and
// pristine entries mixed by critic_mix.
TrainingData load_training_data(const DatasetManifest& generator_manifest,
                                const std::optional<DatasetManifest>& critic_manifest,
                                const TrainConfig& cfg);

struct TrainResult {
  std::vector<HistoryRow> history;
  int steps = 0;
  int epochs = 0;
  bool plateaued = false;
  std::filesystem::path checkpoint;
};

// Checkpoints go to <dir>/checkpoint.pt (atomic replace, every epoch and at
// the end); the loss history to <dir>/history.csv. With resume, training
// continues from an existing checkpoint in dir.
TrainResult train(const TrainingData& data, const TrainConfig& cfg,
                  const std::filesystem::path& dir, bool resume = false);

struct Checkpoint {
  TrainConfig config;
  Generator generator{nullptr};
  Critic critic{nullptr};
  int step = 0;
  int epoch = 0;
  std::vector<HistoryRow> history;
};

Checkpoint load_checkpoint(const std::filesystem::path& file);

// Runs the generator on a densified 3-channel image (any size; reflect
// padded to the generator stride) and returns a unit-range image.
ImagePatch reconstruct(Generator& generator, const ImagePatch& densified);
ImagePatch reconstruct(const std::filesystem::path& checkpoint_file, const ImagePatch& densified);

void write_history_csv(const std::vector<HistoryRow>& rows, const std::filesystem::path& path);

}  // namespace fovrec
