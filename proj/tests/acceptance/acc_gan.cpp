#include <chrono>
#include <cmath>
#include <filesystem>

#include "criteria.hpp"
#include "fovrec/datasets.hpp"
#include "fovrec/networks.hpp"
#include "fovrec/rng.hpp"
#include "fovrec/training.hpp"
#include "test_util.hpp"

namespace fovrec::acceptance {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "fovrec_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Outcome architecture_audit() {
  std::vector<std::string> bad;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) bad.push_back(what);
  };
  torch::manual_seed(7);
  Generator g = build_generator(GeneratorSpec{});
  const std::vector<int> widths = {16, 32, 64, 128, 128};
  expect(g->encoder->size() == widths.size(), "encoder depth");
  for (std::size_t i = 0; i < g->encoder->size(); ++i) {
    auto* block = g->encoder[i]->as<ResidualBlockImpl>();
    expect(block->conv1->options.out_channels() == widths[i], "encoder width " + std::to_string(i));
    expect(block->conv2->options.out_channels() == widths[i], "encoder width " + std::to_string(i));
    expect(block->slope() == 0.2, "encoder slope");
    expect((*block->conv1->options.kernel_size())[0] == 5, "encoder kernel");
  }
  for (std::size_t j = 0; j < g->decoder->size(); ++j) {
    auto* block = g->decoder[j]->as<ResidualBlockImpl>();
    expect(block->conv1->options.out_channels() == widths[3 - j], "decoder width " + std::to_string(j));
    expect(block->slope() == 0.2, "decoder slope");
  }
  expect(g->head->options.out_channels() == 3, "generator head channels");

  torch::NoGradGuard guard;
  const auto x = torch::rand({1, 3, 256, 256}) * 2 - 1;
  const auto y = g->forward(x);
  expect(y.sizes() == x.sizes(), "generator output shape");
  // A saturating head must stay strictly inside (-1, 1) if tanh is applied.
  g->head->weight.mul_(1e4);
  const auto sat = g->forward(x);
  expect(sat.abs().max().item<double>() <= 1.0, "tanh bound");
  expect(sat.abs().max().item<double>() > 0.99, "tanh saturation");

  Critic d = build_critic(CriticSpec{});
  expect(d->spec().patch_size == 64, "critic patch size");
  expect(d->blocks->size() == widths.size(), "critic depth");
  for (std::size_t i = 0; i < d->blocks->size(); ++i) {
    auto* block = d->blocks[i]->as<ResidualBlockImpl>();
    expect(block->conv1->options.out_channels() == widths[i], "critic width " + std::to_string(i));
    expect(block->slope() == 0.2, "critic slope");
  }
  const auto s = d->forward(torch::rand({2, 3, 64, 64}) * 2 - 1);
  expect(s.dim() == 1 && s.size(0) == 2, "critic output is one scalar per image");
  std::string detail = bad.empty() ? "generator 256x256x3 -> 256x256x3, widths 16-32-64-128-128, "
                                     "slope 0.2, tanh head; critic 64x64 -> scalar"
                                   : "mismatches:";
  for (const auto& b : bad) detail += " " + b;
  return {bad.empty(), detail};
}

// MSE in unit range of the generator over the whole training set.
double train_mse(Generator& g, const TrainingData& data) {
  torch::NoGradGuard guard;
  g->eval();
  const auto out = g->forward(data.inputs.to(torch::kFloat32));
  return ((out - data.truths.to(torch::kFloat32)) / 2).pow(2).mean().item<double>();
}

Outcome gan_overfit() {
  const fs::path dir = scratch("gan_overfit");
  const fs::path images = fs::path(FOVREC_DATA_DIR) / "images";
  GeneratorDatasetConfig gcfg;
  gcfg.n_patches = 64;
  gcfg.patch_size = 32;
  gcfg.seed = 8;
  const DatasetManifest gen = build_generator_dataset(images, dir / "generator", gcfg);
  CriticDatasetConfig ccfg;
  ccfg.n_patches = 16;
  ccfg.patch_size = 32;
  ccfg.synthesis.max_iters = 100;
  ccfg.synthesis.refine_iters = 50;
  ccfg.seed = 8;
  const DatasetManifest critic = build_critic_dataset(images, dir / "critic", ccfg);

  bool pass = true;
  std::string detail;
  for (const AdvMode mode : {AdvMode::kStandard, AdvMode::kOurs}) {
    TrainConfig cfg;
    cfg.variant = {ReconTerm::kL2, mode, 0};
    cfg.region = "near";
    cfg.critic.patch_size = 32;
    cfg.batch_size = 4;
    cfg.n_critic = 1;
    cfg.max_steps = 2000;
    cfg.max_epochs = 100000;
    cfg.stop_on_plateau = false;
    cfg.seed = 81;
    const TrainingData data = load_training_data(gen, critic, cfg);

    // Same draw as the trainer's own initialization.
    torch::manual_seed(Rng::derive(cfg.seed, "network-init"));
    Generator initial = build_generator(cfg.generator);
    const double before = train_mse(initial, data);

    const auto start = std::chrono::steady_clock::now();
    const TrainResult r = train(data, cfg, dir / to_string(mode), false);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    Checkpoint ck = load_checkpoint(r.checkpoint);
    const double after = train_mse(ck.generator, data);
    double norm = 0.0;
    const std::size_t tail = std::min<std::size_t>(100, r.history.size());
    for (std::size_t i = r.history.size() - tail; i < r.history.size(); ++i) {
      norm += r.history[i].grad_norm / static_cast<double>(tail);
    }
    const bool ok = r.steps == 2000 && after <= 0.5 * before && norm >= 0.5 && norm <= 1.5;
    pass = pass && ok;
    detail += cat(to_string(mode), ": ", r.steps, " steps, MSE ", before, " -> ", after, " (",
                  100.0 * (1.0 - after / before), "% drop), final GP grad norm ", norm, ", ",
                  secs, " s; ");
  }
  return {pass, detail + "64 patches of 32x32, critic patch 32, batch 4"};
}

Outcome loss_variants() {
  const auto variants_h = all_loss_variants(peak_level_from_letter('H'));
  auto variants = variants_h;
  for (const auto& v : all_loss_variants(peak_level_from_letter('M'))) {
    if (v.recon == ReconTerm::kLaplacian) variants.push_back(v);
  }
  TrainConfig cfg;
  torch::manual_seed(9);
  Critic critic = build_critic(CriticSpec{});
  const auto a = torch::rand({2, 3, 64, 64}) * 2 - 1;
  const auto b = torch::rand({2, 3, 64, 64}) * 2 - 1;
  const auto score_a = critic->forward(a);
  const auto score_b = critic->forward(b);
  int ok = 0;
  double worst_identical = 0.0;
  for (const auto& v : variants) {
    const auto diff = generator_loss(v, a, b, score_a, cfg);
    const auto same = generator_loss(v, b, b, score_b, cfg);
    const bool finite = std::isfinite(diff.total.item<double>()) &&
                        std::isfinite(diff.recon.item<double>()) &&
                        std::isfinite(diff.adv.item<double>()) && diff.recon.item<double>() > 0.0;
    const double identical = std::abs(same.recon.item<double>());
    const double without_adv = std::abs(same.total.item<double>() -
                                        cfg.weights.adv * same.adv.item<double>());
    worst_identical = std::max({worst_identical, identical, without_adv});
    ok += finite && identical < 1e-6 && without_adv < 1e-6 ? 1 : 0;
  }
  const bool six = variants_h.size() == 6;
  return {six && ok == static_cast<int>(variants.size()),
          cat(variants_h.size(), " variants (plus Laplacian peak M), ", ok, "/", variants.size(),
              " finite and zero on identical pairs (max ", worst_identical, ")")};
}

const Registrar r7(7, "Architecture shape and constant audit", architecture_audit);
const Registrar r8(8, "GAN smoke overfit", gan_overfit);
const Registrar r9(9, "Generator-loss variant coverage", loss_variants);

}  // namespace
}  // namespace fovrec::acceptance
