#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "fovrec/errors.hpp"
#include "fovrec/losses.hpp"
#include "fovrec/networks.hpp"
#include "fovrec/pyramid.hpp"
#include "fovrec/tensor.hpp"
#include "fovrec/training.hpp"
#include "test_util.hpp"

using namespace fovrec;

namespace {

int64_t block_params(int64_t in, int64_t out, int64_t k) {
  return (in * out * k * k + out) + (out * out * k * k + out) + (in * out + out);
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.generator.encoder_filters = {4, 8};
  c.critic.patch_size = 16;
  c.critic.block_filters = {4, 8};
  c.batch_size = 2;
  c.n_critic = 1;
  c.lr = 1e-3;
  c.max_epochs = 1000;
  c.stop_on_plateau = false;
  c.seed = 11;
  return c;
}

TrainingData tiny_data(int n, int side, std::uint64_t seed) {
  std::vector<ImagePatch> in, gt;
  for (int i = 0; i < n; ++i) {
    gt.push_back(test::random_patch(side, side, seed + 2 * i));
    in.push_back(test::random_patch(side, side, seed + 2 * i + 1));
  }
  TrainingData d;
  d.inputs = stack_patches(in) * 2 - 1;
  d.truths = stack_patches(gt) * 2 - 1;
  d.critic_natural = d.truths;
  return d;
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "fovrec_test_gan" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

bool same_parameters(torch::nn::Module& a, torch::nn::Module& b) {
  const auto pa = a.parameters(), pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (!torch::equal(pa[i], pb[i])) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("gan") {
  TEST_CASE("generator preserves shape and stays in tanh range") {
    torch::manual_seed(1);
    Generator g = build_generator(GeneratorSpec{});
    const auto x = torch::rand({2, 3, 64, 32}) * 2 - 1;
    const auto y = g->forward(x);
    CHECK(y.sizes() == x.sizes());
    CHECK(y.abs().max().item<double>() < 1.0);
    CHECK_THROWS_AS(g->forward(torch::zeros({1, 2, 32, 32})), ValidationError);
    CHECK_THROWS_AS(g->forward(torch::zeros({1, 3, 48, 32})), ValidationError);
  }

  TEST_CASE("generator parameter count follows the block layout") {
    const GeneratorSpec spec;
    int64_t expect = 0;
    const std::vector<int64_t> enc = {16, 32, 64, 128, 128};
    int64_t c = 3;
    for (int64_t o : enc) {
      expect += block_params(c, o, 5);
      c = o;
    }
    const std::vector<int64_t> dec = {128, 64, 32, 16};
    for (std::size_t j = 0; j < dec.size(); ++j) {
      expect += block_params(c + enc[3 - j], dec[j], 5);
      c = dec[j];
    }
    expect += c * 3 + 3;
    CHECK(parameter_count(*build_generator(spec)) == expect);

    GeneratorSpec wide;
    wide.encoder_filters = {32, 64, 128, 256, 256};
    CHECK(parameter_count(*build_generator(spec)) < parameter_count(*build_generator(wide)) / 3);
  }

  TEST_CASE("spec validation") {
    GeneratorSpec g;
    g.decoder_filters = {8};
    CHECK_THROWS_AS(g.validate(), ValidationError);
    CriticSpec d;
    d.patch_size = 48;
    CHECK_THROWS_AS(d.validate(), ValidationError);
  }

  TEST_CASE("critic scores tiles and averages them") {
    torch::manual_seed(2);
    CriticSpec spec;
    spec.patch_size = 32;
    Critic d = build_critic(spec);
    const auto x = torch::rand({2, 3, 64, 64}) * 2 - 1;
    const auto tiles = d->tile_scores(x);
    REQUIRE(tiles.sizes() == torch::IntArrayRef({2, 4}));
    CHECK(torch::allclose(d->forward(x), tiles.mean(1), 1e-6, 1e-6));

    using torch::indexing::Slice;
    const auto tile = x.index({Slice(), Slice(), Slice(32, 64), Slice(0, 32)});
    CHECK(torch::allclose(d->tile_scores(tile).squeeze(1), tiles.select(1, 2), 1e-5, 1e-5));

    // Swapping the quadrants leaves the averaged score unchanged.
    auto swapped = torch::cat({torch::cat({x.index({Slice(), Slice(), Slice(32, 64), Slice(32, 64)}),
                                           x.index({Slice(), Slice(), Slice(32, 64), Slice(0, 32)})}, 3),
                               torch::cat({x.index({Slice(), Slice(), Slice(0, 32), Slice(32, 64)}),
                                           x.index({Slice(), Slice(), Slice(0, 32), Slice(0, 32)})}, 3)},
                              2);
    CHECK(torch::allclose(d->forward(swapped), d->forward(x), 1e-5, 1e-6));
    CHECK_THROWS_AS(d->forward(torch::zeros({1, 3, 48, 64})), ValidationError);
  }

  TEST_CASE("critic loss is the difference of mean scores") {
    CriticFn mean_critic = [](const torch::Tensor& x) { return x.mean({1, 2, 3}); };
    const auto target = torch::full({3, 3, 8, 8}, 0.5);
    const auto fake = torch::full({3, 3, 8, 8}, -0.25);
    CHECK(critic_loss(mean_critic, target, fake).item<double>() == doctest::Approx(0.75));
  }

  TEST_CASE("gradient penalty for linear critics") {
    const auto target = torch::rand({4, 3, 8, 8}, torch::kFloat64);
    const auto fake = torch::rand({4, 3, 8, 8}, torch::kFloat64);
    for (double scale : {1.0, 3.0, 0.5}) {
      // Gradient of <w, x> is w, with norm `scale`.
      auto w = torch::randn({1, 3, 8, 8}, torch::kFloat64);
      w = w / w.norm() * scale;
      CriticFn linear = [w](const torch::Tensor& x) { return (x * w).sum({1, 2, 3}); };
      const PenaltyResult r = gradient_penalty(linear, target, fake, 10.0);
      CHECK(r.penalty.item<double>() == doctest::Approx(10.0 * (scale - 1) * (scale - 1)).epsilon(1e-9));
      CHECK(r.mean_grad_norm == doctest::Approx(scale).epsilon(1e-9));
    }
    CriticFn constant = [](const torch::Tensor& x) {
      return torch::zeros({x.size(0)}, x.options());
    };
    CHECK(gradient_penalty(constant, target, fake, 10.0).penalty.item<double>() ==
          doctest::Approx(10.0));
  }

  TEST_CASE("gradient penalty is reproducible and differentiable") {
    torch::manual_seed(3);
    CriticSpec spec;
    spec.patch_size = 16;
    spec.block_filters = {4, 8};
    Critic d = build_critic(spec);
    d->to(torch::kFloat64);
    CriticFn fn = [&](const torch::Tensor& x) { return d->forward(x); };
    const auto target = torch::rand({2, 3, 16, 16}, torch::kFloat64);
    const auto fake = torch::rand({2, 3, 16, 16}, torch::kFloat64);
    auto gen = [] { return at::detail::createCPUGenerator(42); };
    const auto a = gradient_penalty(fn, target, fake, 10.0, gen()).penalty;
    const auto b = gradient_penalty(fn, target, fake, 10.0, gen()).penalty;
    CHECK(a.item<double>() == b.item<double>());

    // Derivative of the penalty with respect to one critic weight against a
    // central difference.
    auto& weight = d->fc->weight;
    d->zero_grad();
    gradient_penalty(fn, target, fake, 10.0, gen()).penalty.backward();
    const double analytic = weight.grad()[0][0].item<double>();
    const double h = 1e-6;
    double fd;
    {
      torch::NoGradGuard guard;
      weight[0][0] += h;
    }
    const double up = gradient_penalty(fn, target, fake, 10.0, gen()).penalty.item<double>();
    {
      torch::NoGradGuard guard;
      weight[0][0] -= 2 * h;
    }
    const double down = gradient_penalty(fn, target, fake, 10.0, gen()).penalty.item<double>();
    fd = (up - down) / (2 * h);
    CHECK(analytic == doctest::Approx(fd).epsilon(1e-5));
  }

  TEST_CASE("Gaussian level weights") {
    const auto w = gaussian_level_weights(0, 1.0, 5);
    const std::vector<double> expect = {0.570, 0.346, 0.0772, 0.00633, 0.000191};
    REQUIRE(w.size() == 5);
    for (int l = 0; l < 5; ++l) CHECK(w[l] == doctest::Approx(expect[l]).epsilon(3e-3));
    const auto m = gaussian_level_weights(3, 1.0, 5);
    CHECK(std::max_element(m.begin(), m.end()) - m.begin() == 3);
    CHECK(m[2] == doctest::Approx(m[4]));
    double s = 0;
    for (double v : m) s += v;
    CHECK(s == doctest::Approx(1.0));
  }

  TEST_CASE("tensor Laplacian levels match the image pyramid") {
    const Image a = test::random_image(40, 36, 3, 5);
    const Image b = test::random_image(40, 36, 3, 6);
    const auto ta = to_tensor(a, torch::kFloat64);
    const auto tb = to_tensor(b, torch::kFloat64);
    const auto levels = laplacian_levels(ta, 4);
    const auto pa = build_laplacian_pyramid(a, 4);
    const auto pb = build_laplacian_pyramid(b, 4);
    REQUIRE(levels.size() == 4);
    for (int l = 0; l < 4; ++l) {
      CHECK(max_abs_diff(to_image(levels[l]), pa.level(l)) < 1e-12);
    }
    const std::vector<double> w = {0.1, 0.2, 0.3, 0.4};
    double expect = 0.0;
    for (int l = 0; l < 4; ++l) {
      const Image d = pa.level(l) - pb.level(l);
      double s = 0.0;
      for (double v : d.data()) s += v * v;
      expect += w[l] * s / static_cast<double>(d.size());
    }
    CHECK(laplacian_loss(ta, tb, w).item<double>() == doctest::Approx(expect).epsilon(1e-12));
  }

  TEST_CASE("loss variants") {
    const auto variants = all_loss_variants(3);
    REQUIRE(variants.size() == 6);
    std::set<std::string> names;
    for (const auto& v : variants) names.insert(v.name());
    CHECK(names.size() == 6);
    CHECK(names.count("lapl-L3*") == 1);

    TrainConfig cfg;
    const auto x = torch::rand({2, 3, 32, 32}) * 2 - 1;
    const auto zero_score = torch::zeros({2});
    for (const auto& v : variants) {
      const auto loss = generator_loss(v, x, x, zero_score, cfg);
      CHECK(std::abs(loss.total.item<double>()) < 1e-6);
    }
    const auto y = torch::rand({2, 3, 32, 32}) * 2 - 1;
    const double mse_unit = ((x - y) / 2).pow(2).mean().item<double>();
    const auto score = torch::tensor({0.5f, 1.5f});
    const auto l2 = generator_loss(variants[0], x, y, score, cfg);
    CHECK(l2.recon.item<double>() == doctest::Approx(mse_unit).epsilon(1e-5));
    CHECK(l2.adv.item<double>() == doctest::Approx(-1.0));
    CHECK(l2.total.item<double>() == doctest::Approx(2000.0 * mse_unit - 1.0).epsilon(1e-5));
    const auto lp = generator_loss({ReconTerm::kLpips, AdvMode::kStandard, 0}, x, y, {}, cfg);
    CHECK(lp.recon.item<double>() > 0.0);
    CHECK(lp.total.item<double>() == doctest::Approx(100.0 * lp.recon.item<double>()));
    CHECK_THROWS_AS(parse_recon_term("l1"), ValidationError);
    for (const auto& v : variants) CHECK(parse_loss_variant(v.name()).name() == v.name());
    CHECK(parse_loss_variant("lapl-M*").lapl_peak == 3);
    CHECK(parse_loss_variant("lapl-H").lapl_peak == 0);
    CHECK_THROWS_AS(parse_loss_variant("l2-H"), ValidationError);
    CHECK(peak_level_from_letter('M') == 3);
  }

  TEST_CASE("config JSON round trip") {
    TrainConfig c = tiny_config();
    c.variant = {ReconTerm::kLaplacian, AdvMode::kOurs, 3};
    c.critic_mix = 0.25;
    const TrainConfig d = TrainConfig::from_json(c.to_json());
    CHECK(d.to_json() == c.to_json());
    CHECK(d.variant.name() == "lapl-L3*");
  }

  TEST_CASE("training is deterministic and resume matches an uninterrupted run") {
    const TrainingData data = tiny_data(6, 16, 100);
    TrainConfig cfg = tiny_config();
    cfg.max_steps = 4;
    const auto a = train(data, cfg, fresh_dir("a"));
    const auto b = train(data, cfg, fresh_dir("b"));
    CHECK(a.steps == 4);
    REQUIRE(a.history.size() == 4);
    for (int i = 0; i < 4; ++i) CHECK(a.history[i].gen_loss == b.history[i].gen_loss);

    TrainConfig half = cfg;
    half.max_steps = 2;
    const auto dir_c = fresh_dir("c");
    train(data, half, dir_c);
    const auto c = train(data, cfg, dir_c, true);
    CHECK(c.steps == 4);
    for (int i = 0; i < 4; ++i) CHECK(c.history[i].gen_loss == a.history[i].gen_loss);

    Checkpoint ca = load_checkpoint(a.checkpoint);
    Checkpoint cc = load_checkpoint(c.checkpoint);
    CHECK(ca.step == 4);
    CHECK(same_parameters(*ca.generator, *cc.generator));
    CHECK(same_parameters(*ca.critic, *cc.critic));

    TrainConfig other = cfg;
    other.seed = 12;
    const auto d = train(data, other, fresh_dir("d"));
    CHECK(d.history.back().gen_loss != a.history.back().gen_loss);

    std::ifstream csv(dir_c / "history.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "step,critic_loss,gen_loss,gp,recon_term");
    int rows = 0;
    for (std::string line; std::getline(csv, line);) ++rows;
    CHECK(rows == 4);
  }

  TEST_CASE("training stops on a loss plateau") {
    const TrainingData data = tiny_data(1, 16, 200);
    TrainConfig cfg = tiny_config();
    cfg.batch_size = 1;
    cfg.n_critic = 0;
    cfg.weights.adv = 0.0;
    cfg.lr = 1e-12;
    cfg.stop_on_plateau = true;
    cfg.plateau_window = 5;
    cfg.max_steps = 100;
    const auto r = train(data, cfg, fresh_dir("plateau"));
    CHECK(r.plateaued);
    CHECK(r.steps == 15);
  }

  TEST_CASE("divergence raises and keeps a finite checkpoint") {
    TrainingData data = tiny_data(2, 16, 300);
    data.inputs[0][0][0][0] = std::numeric_limits<float>::quiet_NaN();
    TrainConfig cfg = tiny_config();
    cfg.batch_size = 2;
    cfg.max_steps = 3;
    const auto dir = fresh_dir("diverge");
    CHECK_THROWS_AS(train(data, cfg, dir), ConvergenceError);
    Checkpoint c = load_checkpoint(dir / "checkpoint.pt");
    for (const auto& p : c.generator->parameters()) CHECK(torch::isfinite(p).all().item<bool>());
  }

  TEST_CASE("reconstruct pads to the generator stride") {
    const TrainingData data = tiny_data(2, 16, 400);
    TrainConfig cfg = tiny_config();
    cfg.max_steps = 1;
    const auto r = train(data, cfg, fresh_dir("recon"));
    const ImagePatch in = test::random_patch(21, 18, 9);
    const ImagePatch out = reconstruct(r.checkpoint, in);
    CHECK(out.height() == 21);
    CHECK(out.width() == 18);
    CHECK(out.pixels().min() >= 0.0);
    CHECK(out.pixels().max() <= 1.0);
    CHECK_THROWS_AS(load_checkpoint(fresh_dir("missing") / "checkpoint.pt"), IoError);
  }

  TEST_CASE("training data from manifests") {
    const auto dir = fresh_dir("manifest");
    DatasetManifest gen(dir / "gen.jsonl");
    DatasetManifest crit(dir / "crit.jsonl");
    for (int i = 0; i < 3; ++i) {
      const std::string n = "n" + std::to_string(i) + ".png", s = "s" + std::to_string(i) + ".png";
      write_png(test::random_patch(16, 16, i), dir / n);
      write_png(test::random_patch(16, 16, 10 + i), dir / s);
      gen.append({"natural", n, "img", {0, 16 * i, 16, 16}, "near", 0, "", 0, ""});
      gen.append({"densified_input", s, "img", {0, 16 * i, 16, 16}, "near", 0.12, "vac", 1, n});
      crit.append({"distorted", s, "img", {0, 16 * i, 16, 16}, "near", 9.09, "B", 1, ""});
    }
    TrainConfig cfg;
    const auto std_data = load_training_data(gen, std::nullopt, cfg);
    CHECK(std_data.inputs.size(0) == 3);
    CHECK(torch::equal(std_data.critic_natural, std_data.truths));
    CHECK(std_data.truths.min().item<double>() >= -1.0);

    cfg.variant.adv = AdvMode::kOurs;
    CHECK_THROWS_AS(load_training_data(gen, std::nullopt, cfg), ValidationError);
    CHECK_THROWS_AS(load_training_data(gen, crit, cfg), ValidationError);  // no pristine entries
    cfg.critic_mix = 1.0;
    const auto ours = load_training_data(gen, crit, cfg);
    CHECK(ours.critic_distorted.size(0) == 3);
    cfg.region = "far";
    CHECK_THROWS_AS(load_training_data(gen, crit, cfg), ValidationError);
  }
}
