#include "fovrec/training.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "fovrec/errors.hpp"
#include "fovrec/filter.hpp"
#include "fovrec/rng.hpp"
#include "fovrec/tensor.hpp"

namespace fovrec {

using nlohmann::json;

std::string to_string(ReconTerm t) {
  switch (t) {
    case ReconTerm::kL2: return "l2";
    case ReconTerm::kLpips: return "lpips";
    case ReconTerm::kLaplacian: return "lapl";
  }
  return "?";
}

std::string to_string(AdvMode m) { return m == AdvMode::kOurs ? "ours" : "standard"; }

ReconTerm parse_recon_term(const std::string& s) {
  if (s == "l2") return ReconTerm::kL2;
  if (s == "lpips") return ReconTerm::kLpips;
  if (s == "lapl") return ReconTerm::kLaplacian;
  throw ValidationError("unknown loss variant: " + s + " (expected l2, lpips or lapl)");
}

AdvMode parse_adv_mode(const std::string& s) {
  if (s == "standard") return AdvMode::kStandard;
  if (s == "ours") return AdvMode::kOurs;
  throw ValidationError("unknown adversarial mode: " + s + " (expected standard or ours)");
}

int peak_level_from_letter(char letter) {
  if (letter == 'H' || letter == 'h') return 0;
  if (letter == 'M' || letter == 'm') return 3;
  throw ValidationError(std::string("unknown pyramid peak letter: ") + letter);
}

std::string LossVariant::name() const {
  std::string n = to_string(recon);
  if (recon == ReconTerm::kLaplacian) n += "-L" + std::to_string(lapl_peak);
  if (adv == AdvMode::kOurs) n += "*";
  return n;
}

LossVariant parse_loss_variant(const std::string& name) {
  LossVariant v;
  std::string base = name;
  if (!base.empty() && base.back() == '*') {
    v.adv = AdvMode::kOurs;
    base.pop_back();
  }
  const auto dash = base.find('-');
  v.recon = parse_recon_term(base.substr(0, dash));
  if (v.recon == ReconTerm::kLaplacian) {
    const std::string level = dash == std::string::npos ? "H" : base.substr(dash + 1);
    if (level.size() == 1) {
      v.lapl_peak = peak_level_from_letter(level[0]);
    } else if (level.size() > 1 && level[0] == 'L' &&
               level.find_first_not_of("0123456789", 1) == std::string::npos) {
      v.lapl_peak = std::stoi(level.substr(1));
    } else {
      throw ValidationError("unknown Laplacian peak in loss variant: " + name);
    }
  } else if (dash != std::string::npos) {
    throw ValidationError("unknown loss variant: " + name);
  }
  return v;
}

std::vector<LossVariant> all_loss_variants(int lapl_peak) {
  std::vector<LossVariant> out;
  for (ReconTerm r : {ReconTerm::kL2, ReconTerm::kLpips, ReconTerm::kLaplacian}) {
    for (AdvMode a : {AdvMode::kStandard, AdvMode::kOurs}) out.push_back({r, a, lapl_peak});
  }
  return out;
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ValidationError("learning rate must be positive");
  if (n_critic < 0 || batch_size < 1) throw ValidationError("n_critic >= 0 and batch_size >= 1");
  if (max_epochs < 1 && max_steps < 1) throw ValidationError("no training budget");
  if (!(critic_mix >= 0.0 && critic_mix <= 1.0)) throw ValidationError("critic_mix in [0, 1]");
  if (region != "near" && region != "far") throw ValidationError("region must be near or far");
  if (variant.recon == ReconTerm::kLaplacian &&
      (variant.lapl_peak < 0 || variant.lapl_peak >= lapl_levels)) {
    throw ValidationError("Laplacian peak level outside the pyramid");
  }
  if (plateau_window < 1) throw ValidationError("plateau window must be >= 1");
  generator.validate();
  critic.validate();
}

std::string TrainConfig::to_json() const {
  json j;
  j["lr"] = lr;
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["adam_eps"] = adam_eps;
  j["variant"] = {{"recon", to_string(variant.recon)},
                  {"adv", to_string(variant.adv)},
                  {"lapl_peak", variant.lapl_peak}};
  j["weights"] = {{"l2", weights.l2}, {"lpips", weights.lpips}, {"lapl", weights.lapl},
                  {"adv", weights.adv}};
  j["lapl_levels"] = lapl_levels;
  j["lapl_sigma"] = lapl_sigma;
  j["gp_weight"] = gp_weight;
  j["n_critic"] = n_critic;
  j["batch_size"] = batch_size;
  j["max_epochs"] = max_epochs;
  j["max_steps"] = max_steps;
  j["steps_per_epoch"] = steps_per_epoch;
  j["region"] = region;
  j["critic_mix"] = critic_mix;
  j["stop_on_plateau"] = stop_on_plateau;
  j["plateau_window"] = plateau_window;
  j["plateau_tol"] = plateau_tol;
  j["generator"] = {{"encoder_filters", generator.encoder_filters},
                    {"decoder_filters", generator.decoder_filters},
                    {"conv_kernel", generator.conv_kernel},
                    {"skip_kernel", generator.skip_kernel},
                    {"leaky_slope", generator.leaky_slope}};
  j["critic"] = {{"patch_size", critic.patch_size},
                 {"block_filters", critic.block_filters},
                 {"conv_kernel", critic.conv_kernel},
                 {"skip_kernel", critic.skip_kernel},
                 {"leaky_slope", critic.leaky_slope}};
  j["seed"] = seed;
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  const json j = json::parse(text);
  TrainConfig c;
  c.lr = j.value("lr", c.lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  if (j.contains("variant")) {
    const json& v = j["variant"];
    c.variant.recon = parse_recon_term(v.value("recon", std::string("l2")));
    c.variant.adv = parse_adv_mode(v.value("adv", std::string("standard")));
    c.variant.lapl_peak = v.value("lapl_peak", 0);
  }
  if (j.contains("weights")) {
    const json& w = j["weights"];
    c.weights.l2 = w.value("l2", c.weights.l2);
    c.weights.lpips = w.value("lpips", c.weights.lpips);
    c.weights.lapl = w.value("lapl", c.weights.lapl);
    c.weights.adv = w.value("adv", c.weights.adv);
  }
  c.lapl_levels = j.value("lapl_levels", c.lapl_levels);
  c.lapl_sigma = j.value("lapl_sigma", c.lapl_sigma);
  c.gp_weight = j.value("gp_weight", c.gp_weight);
  c.n_critic = j.value("n_critic", c.n_critic);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.steps_per_epoch = j.value("steps_per_epoch", c.steps_per_epoch);
  c.region = j.value("region", c.region);
  c.critic_mix = j.value("critic_mix", c.critic_mix);
  c.stop_on_plateau = j.value("stop_on_plateau", c.stop_on_plateau);
  c.plateau_window = j.value("plateau_window", c.plateau_window);
  c.plateau_tol = j.value("plateau_tol", c.plateau_tol);
  if (j.contains("generator")) {
    const json& g = j["generator"];
    c.generator.encoder_filters = g.value("encoder_filters", c.generator.encoder_filters);
    c.generator.decoder_filters = g.value("decoder_filters", c.generator.decoder_filters);
    c.generator.conv_kernel = g.value("conv_kernel", c.generator.conv_kernel);
    c.generator.skip_kernel = g.value("skip_kernel", c.generator.skip_kernel);
    c.generator.leaky_slope = g.value("leaky_slope", c.generator.leaky_slope);
  }
  if (j.contains("critic")) {
    const json& d = j["critic"];
    c.critic.patch_size = d.value("patch_size", c.critic.patch_size);
    c.critic.block_filters = d.value("block_filters", c.critic.block_filters);
    c.critic.conv_kernel = d.value("conv_kernel", c.critic.conv_kernel);
    c.critic.skip_kernel = d.value("skip_kernel", c.critic.skip_kernel);
    c.critic.leaky_slope = d.value("leaky_slope", c.critic.leaky_slope);
  }
  c.seed = j.value("seed", c.seed);
  return c;
}

GeneratorLoss generator_loss(const LossVariant& variant, const torch::Tensor& recon,
                             const torch::Tensor& target, const torch::Tensor& critic_score,
                             const TrainConfig& cfg) {
  if (recon.sizes() != target.sizes()) throw ValidationError("generator_loss: shapes differ");
  const auto ru = (recon + 1) * 0.5;
  const auto tu = (target + 1) * 0.5;
  GeneratorLoss out;
  double w = 0.0;
  switch (variant.recon) {
    case ReconTerm::kL2:
      out.recon = (ru - tu).pow(2).mean();
      w = cfg.weights.l2;
      break;
    case ReconTerm::kLpips:
      out.recon = (*PerceptualDistance::shared())(ru, tu).mean().to(recon.scalar_type());
      w = cfg.weights.lpips;
      break;
    case ReconTerm::kLaplacian:
      out.recon = laplacian_loss(
          ru, tu, gaussian_level_weights(variant.lapl_peak, cfg.lapl_sigma, cfg.lapl_levels));
      w = cfg.weights.lapl;
      break;
  }
  out.adv = critic_score.defined() ? -critic_score.mean() : torch::zeros({}, recon.options());
  out.total = w * out.recon + cfg.weights.adv * out.adv;
  return out;
}

namespace {

torch::Tensor load_signed(const DatasetManifest& m, const std::vector<std::string>& paths) {
  std::vector<ImagePatch> patches;
  patches.reserve(paths.size());
  for (const auto& p : paths) patches.push_back(read_image(m.resolve(p)));
  return stack_patches(patches) * 2 - 1;
}

}  // namespace

TrainingData load_training_data(const DatasetManifest& generator_manifest,
                                const std::optional<DatasetManifest>& critic_manifest,
                                const TrainConfig& cfg) {
  TrainingData d;
  std::vector<std::string> inputs, truths;
  for (const auto& e : generator_manifest.select("densified_input", cfg.region)) {
    if (e.partner.empty()) throw ValidationError("densified input without partner: " + e.patch_path);
    inputs.push_back(e.patch_path);
    truths.push_back(e.partner);
  }
  if (inputs.empty()) {
    throw ValidationError("generator manifest has no densified inputs for region " + cfg.region);
  }
  d.inputs = load_signed(generator_manifest, inputs);
  d.truths = load_signed(generator_manifest, truths);
  if (cfg.variant.adv == AdvMode::kStandard) {
    d.critic_natural = d.truths;
    d.critic_sources.assign(truths.size(), "natural");
    return d;
  }
  if (!critic_manifest) throw ValidationError("'ours' training needs a critic manifest");
  std::vector<std::string> distorted, natural;
  for (const auto& e : critic_manifest->select("distorted", cfg.region)) distorted.push_back(e.patch_path);
  if (distorted.empty()) {
    throw ValidationError("critic manifest has no distorted entries for region " + cfg.region);
  }
  d.critic_distorted = load_signed(*critic_manifest, distorted);
  d.critic_sources.assign(distorted.size(), "distorted");
  if (cfg.critic_mix < 1.0) {
    for (const auto& e : critic_manifest->select("natural", cfg.region)) natural.push_back(e.patch_path);
    if (natural.empty()) {
      throw ValidationError("critic mix below 1 needs pristine entries in the critic manifest");
    }
    d.critic_natural = load_signed(*critic_manifest, natural);
    d.critic_sources.insert(d.critic_sources.end(), natural.size(), "natural");
  }
  return d;
}

void write_history_csv(const std::vector<HistoryRow>& rows, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    out.precision(10);
    out << "step,critic_loss,gen_loss,gp,recon_term\n";
    for (const auto& r : rows) {
      out << r.step << ',' << r.critic_loss << ',' << r.gen_loss << ',' << r.gp << ','
          << r.recon_term << '\n';
    }
    if (!out) throw IoError("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace {

std::string history_to_json(const std::vector<HistoryRow>& rows) {
  json j = json::array();
  for (const auto& r : rows) {
    j.push_back({r.step, r.critic_loss, r.gen_loss, r.gp, r.recon_term, r.grad_norm});
  }
  return j.dump();
}

std::vector<HistoryRow> history_from_json(const std::string& text) {
  std::vector<HistoryRow> rows;
  for (const auto& r : json::parse(text)) {
    rows.push_back({r[0].get<int>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>(),
                    r[4].get<double>(), r[5].get<double>()});
  }
  return rows;
}

struct TrainingState {
  TrainConfig cfg;
  Generator g{nullptr};
  Critic d{nullptr};
  std::unique_ptr<torch::optim::Adam> g_opt;
  std::unique_ptr<torch::optim::Adam> d_opt;
  int step = 0;
  int epoch = 0;
  std::vector<HistoryRow> history;
};

torch::optim::AdamOptions adam_options(const TrainConfig& cfg) {
  return torch::optim::AdamOptions(cfg.lr).betas({cfg.beta1, cfg.beta2}).eps(cfg.adam_eps);
}

TrainingState fresh_state(const TrainConfig& cfg) {
  TrainingState s;
  s.cfg = cfg;
  torch::manual_seed(Rng::derive(cfg.seed, "network-init"));
  s.g = build_generator(cfg.generator);
  s.d = build_critic(cfg.critic);
  s.g_opt = std::make_unique<torch::optim::Adam>(s.g->parameters(), adam_options(cfg));
  s.d_opt = std::make_unique<torch::optim::Adam>(s.d->parameters(), adam_options(cfg));
  return s;
}

void save_state(const TrainingState& s, const std::filesystem::path& file) {
  torch::serialize::OutputArchive root, ga, da, gopt, dopt;
  s.g->save(ga);
  s.d->save(da);
  s.g_opt->save(gopt);
  s.d_opt->save(dopt);
  root.write("generator", ga);
  root.write("critic", da);
  root.write("generator_optimizer", gopt);
  root.write("critic_optimizer", dopt);
  root.write("config", c10::IValue(s.cfg.to_json()));
  root.write("step", c10::IValue(static_cast<int64_t>(s.step)));
  root.write("epoch", c10::IValue(static_cast<int64_t>(s.epoch)));
  root.write("history", c10::IValue(history_to_json(s.history)));
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  const auto tmp = std::filesystem::path(file.string() + ".tmp");
  root.save_to(tmp.string());
  std::filesystem::rename(tmp, file);
}

TrainingState load_state(const std::filesystem::path& file) {
  if (!std::filesystem::exists(file)) throw IoError("checkpoint not found: " + file.string());
  torch::serialize::InputArchive root, ga, da, gopt, dopt;
  try {
    root.load_from(file.string());
  } catch (const c10::Error& e) {
    throw IoError("cannot read checkpoint " + file.string() + ": " + e.what_without_backtrace());
  }
  c10::IValue v;
  root.read("config", v);
  TrainingState s = fresh_state(TrainConfig::from_json(v.toStringRef()));
  root.read("generator", ga);
  root.read("critic", da);
  root.read("generator_optimizer", gopt);
  root.read("critic_optimizer", dopt);
  s.g->load(ga);
  s.d->load(da);
  s.g_opt->load(gopt);
  s.d_opt->load(dopt);
  root.read("step", v);
  s.step = static_cast<int>(v.toInt());
  root.read("epoch", v);
  s.epoch = static_cast<int>(v.toInt());
  root.read("history", v);
  s.history = history_from_json(v.toStringRef());
  return s;
}

torch::Tensor gather(const torch::Tensor& pool, const std::vector<int64_t>& idx) {
  return pool.index_select(0, torch::tensor(idx, torch::kLong));
}

// Critic targets for one batch: each slot picks the distorted pool with
// probability critic_mix (when present), otherwise the natural pool.
torch::Tensor critic_targets(const TrainingData& data, const TrainConfig& cfg, Rng& rng, int n) {
  std::vector<torch::Tensor> rows;
  rows.reserve(n);
  const bool has_distorted = data.critic_distorted.defined() && data.critic_distorted.size(0) > 0;
  const bool has_natural = data.critic_natural.defined() && data.critic_natural.size(0) > 0;
  for (int i = 0; i < n; ++i) {
    const bool distorted =
        has_distorted && (!has_natural || rng.uniform() < cfg.critic_mix);
    const torch::Tensor& pool = distorted ? data.critic_distorted : data.critic_natural;
    rows.push_back(pool[static_cast<int64_t>(rng.uniform_index(pool.size(0)))]);
  }
  return torch::stack(rows);
}

std::vector<int64_t> batch_indices(Rng& rng, int64_t n, int b) {
  std::vector<int64_t> idx(b);
  for (auto& i : idx) i = static_cast<int64_t>(rng.uniform_index(n));
  return idx;
}

bool plateau_reached(const std::vector<HistoryRow>& h, int window, double tol) {
  const int n = static_cast<int>(h.size());
  if (n < 3 * window || n % window != 0) return false;
  auto avg = [&](int end) {
    double s = 0.0;
    for (int i = end - window; i < end; ++i) s += h[i].gen_loss;
    return s / window;
  };
  const double a0 = avg(n - 2 * window), a1 = avg(n - window), a2 = avg(n);
  auto rel = [](double a, double b) { return std::abs(b - a) / std::max(std::abs(a), 1e-12); };
  return rel(a0, a1) < tol && rel(a1, a2) < tol;
}

HistoryRow train_step(TrainingState& s, const TrainingData& data) {
  const TrainConfig& cfg = s.cfg;
  Rng rng(Rng::derive(cfg.seed, "step-" + std::to_string(s.step)));
  torch::Generator gen = at::detail::createCPUGenerator(rng.next_u64());
  const int64_t n = data.inputs.size(0);
  const int b = cfg.batch_size;
  CriticFn critic = [&](const torch::Tensor& x) { return s.d->forward(x); };

  HistoryRow row;
  row.step = s.step;
  for (int k = 0; k < cfg.n_critic; ++k) {
    const auto idx = batch_indices(rng, n, b);
    torch::Tensor fake;
    {
      torch::NoGradGuard guard;
      fake = s.g->forward(gather(data.inputs, idx));
    }
    const auto target = critic_targets(data, cfg, rng, b);
    const auto adv = critic_loss(critic, target, fake);
    const PenaltyResult gp = gradient_penalty(critic, target, fake, cfg.gp_weight, gen);
    const auto objective = -adv + gp.penalty;
    s.d_opt->zero_grad();
    objective.backward();
    s.d_opt->step();
    row.critic_loss = adv.item<double>();
    row.gp = gp.penalty.item<double>();
    row.grad_norm = gp.mean_grad_norm;
  }
  const auto idx = batch_indices(rng, n, b);
  const auto fake = s.g->forward(gather(data.inputs, idx));
  const torch::Tensor score = cfg.weights.adv != 0.0 ? s.d->forward(fake) : torch::Tensor();
  const GeneratorLoss loss = generator_loss(cfg.variant, fake, gather(data.truths, idx), score, cfg);
  s.g_opt->zero_grad();
  loss.total.backward();
  s.g_opt->step();
  // The critic's parameters received gradients through the generator loss;
  // they are cleared before the next critic update.
  s.d_opt->zero_grad();
  row.gen_loss = loss.total.item<double>();
  row.recon_term = loss.recon.item<double>();
  return row;
}

}  // namespace

TrainResult train(const TrainingData& data, const TrainConfig& cfg_in,
                  const std::filesystem::path& dir, bool resume) {
  cfg_in.validate();
  if (!data.inputs.defined() || data.inputs.size(0) == 0) {
    throw ValidationError("no training pairs");
  }
  const auto ckpt = dir / "checkpoint.pt";
  TrainingState s;
  if (resume && std::filesystem::exists(ckpt)) {
    s = load_state(ckpt);
    // Budgets may be extended on resume; the rest of the configuration is
    // taken from the checkpoint.
    s.cfg.max_steps = cfg_in.max_steps;
    s.cfg.max_epochs = cfg_in.max_epochs;
  } else {
    s = fresh_state(cfg_in);
    save_state(s, ckpt);
  }
  const TrainConfig& cfg = s.cfg;
  std::ofstream(dir / "config.json") << cfg.to_json() << '\n';
  const int64_t n = data.inputs.size(0);
  const int per_epoch = cfg.steps_per_epoch > 0
                            ? cfg.steps_per_epoch
                            : static_cast<int>((n + cfg.batch_size - 1) / cfg.batch_size);
  const int budget = cfg.max_steps > 0 ? cfg.max_steps : per_epoch * cfg.max_epochs;

  TrainResult result;
  s.g->train();
  s.d->train();
  while (s.step < budget && s.epoch < cfg.max_epochs) {
    const HistoryRow row = train_step(s, data);
    if (!std::isfinite(row.gen_loss) || !std::isfinite(row.critic_loss) || !std::isfinite(row.gp)) {
      write_history_csv(s.history, dir / "history.csv");
      throw ConvergenceError("training diverged at step " + std::to_string(s.step) +
                             "; last finite checkpoint is " + ckpt.string());
    }
    s.history.push_back(row);
    ++s.step;
    bool stop = false;
    if (cfg.stop_on_plateau && plateau_reached(s.history, cfg.plateau_window, cfg.plateau_tol)) {
      result.plateaued = true;
      stop = true;
    }
    if (s.step % per_epoch == 0) {
      ++s.epoch;
      save_state(s, ckpt);
      write_history_csv(s.history, dir / "history.csv");
    }
    if (stop) break;
  }
  save_state(s, ckpt);
  write_history_csv(s.history, dir / "history.csv");
  result.history = s.history;
  result.steps = s.step;
  result.epochs = s.epoch;
  result.checkpoint = ckpt;
  return result;
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
  TrainingState s = load_state(file);
  Checkpoint c;
  c.config = s.cfg;
  c.generator = s.g;
  c.critic = s.d;
  c.step = s.step;
  c.epoch = s.epoch;
  c.history = s.history;
  return c;
}

namespace {

torch::Tensor reflect_pad_to(const torch::Tensor& x, int64_t h, int64_t w) {
  std::vector<int64_t> iy(h), ix(w);
  for (int64_t i = 0; i < h; ++i) iy[i] = reflect_index(static_cast<int>(i), static_cast<int>(x.size(2)));
  for (int64_t i = 0; i < w; ++i) ix[i] = reflect_index(static_cast<int>(i), static_cast<int>(x.size(3)));
  return x.index_select(2, torch::tensor(iy, torch::kLong))
      .index_select(3, torch::tensor(ix, torch::kLong));
}

}  // namespace

ImagePatch reconstruct(Generator& generator, const ImagePatch& densified) {
  if (densified.pixels().channels() != 3) {
    throw ValidationError("reconstruct expects a 3-channel densified image");
  }
  const int stride = generator->spec().stride();
  const int h = densified.height(), w = densified.width();
  const int ph = (h + stride - 1) / stride * stride, pw = (w + stride - 1) / stride * stride;
  torch::NoGradGuard guard;
  generator->eval();
  const auto x = reflect_pad_to(to_tensor(densified.to_signed()), ph, pw);
  const auto y = generator->forward(x).narrow(2, 0, h).narrow(3, 0, w);
  return ImagePatch(to_image((y.clamp(-1.0, 1.0) + 1) * 0.5));
}

ImagePatch reconstruct(const std::filesystem::path& checkpoint_file, const ImagePatch& densified) {
  Checkpoint c = load_checkpoint(checkpoint_file);
  return reconstruct(c.generator, densified);
}

}  // namespace fovrec
