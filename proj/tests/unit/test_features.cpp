#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fovrec/backbone.hpp"
#include "fovrec/errors.hpp"
#include "fovrec/features.hpp"
#include "fovrec/tensor.hpp"
#include "gram_oracle.hpp"
#include "test_util.hpp"

using namespace fovrec;

namespace {

FeatureStack random_stack(const std::vector<std::string>& names, const std::vector<int>& channels,
                          const std::vector<int>& sides, std::uint64_t seed) {
  torch::manual_seed(seed);
  FeatureStack s;
  s.layers = names;
  for (std::size_t l = 0; l < names.size(); ++l) {
    s.maps[names[l]] = torch::randn({1, channels[l], sides[l], sides[l]}, torch::kFloat64);
  }
  return s;
}

}  // namespace

TEST_SUITE("features") {
  TEST_CASE("layer table follows the 19-layer architecture") {
    const auto& layers = backbone_layers();
    CHECK(layers.size() == 37);
    int convs = 0, pools = 0;
    for (const auto& l : layers) {
      convs += l.kind == LayerKind::kConv;
      pools += l.kind == LayerKind::kPool;
    }
    CHECK(convs == 16);
    CHECK(pools == 5);
    CHECK(backbone_layer("relu1_1").channels == 64);
    CHECK(backbone_layer("relu2_1").channels == 128);
    CHECK(backbone_layer("relu3_4").channels == 256);
    CHECK(backbone_layer("relu4_1").channels == 512);
    CHECK(backbone_layer("pool5").channels == 512);
    CHECK(backbone_layer("conv3_1").sequence_index == 10);
    CHECK(backbone_layer("pool5").sequence_index == 36);
    CHECK_THROWS_AS(backbone_layer("relu6_1"), ValidationError);
  }

  TEST_CASE("activation shapes and determinism") {
    const auto net = Backbone::shared();
    const ImagePatch img = test::random_patch(64, 64, 3);
    torch::NoGradGuard guard;
    const FeatureStack a = extract_features(*net, img, {"relu1_1", "pool2", "relu3_1"});
    const FeatureStack b = extract_features(*net, img, {"relu1_1", "pool2", "relu3_1"});
    CHECK(a.maps.at("relu1_1").sizes() == torch::IntArrayRef({1, 64, 64, 64}));
    CHECK(a.maps.at("pool2").sizes() == torch::IntArrayRef({1, 128, 16, 16}));
    CHECK(a.maps.at("relu3_1").sizes() == torch::IntArrayRef({1, 256, 16, 16}));
    for (const auto& name : a.layers) CHECK(torch::equal(a.maps.at(name), b.maps.at(name)));
    CHECK_THROWS_AS(extract_features(*net, img, {"relu9_9"}), ValidationError);
    CHECK_THROWS_AS(extract_features(*net, img, {}), ValidationError);
  }

  TEST_CASE("zero image first layer equals bias plus normalized-offset response") {
    BackboneConfig cfg;
    cfg.dtype = torch::kFloat64;
    const Backbone net(cfg);
    torch::NoGradGuard guard;
    const auto zero = torch::zeros({1, 3, 16, 16}, torch::kFloat64);
    const auto out = net.forward(zero, {"conv1_1", "relu1_1"});
    // Recover the first conv's parameters through the state dict round trip.
    const auto path = std::filesystem::temp_directory_path() / "fovrec_test_bb" / "w.pth";
    net.save_state_dict(path);
    const auto dict = torch::pickle_load([&] {
                        std::ifstream in(path, std::ios::binary);
                        return std::vector<char>((std::istreambuf_iterator<char>(in)),
                                                 std::istreambuf_iterator<char>());
                      }())
                          .toGenericDict();
    torch::Tensor w, b;
    for (const auto& item : dict) {
      if (item.key().toStringRef() == "features.0.weight") w = item.value().toTensor();
      if (item.key().toStringRef() == "features.0.bias") b = item.value().toTensor();
    }
    REQUIRE(w.defined());
    auto wa = w.accessor<float, 4>();
    auto ba = b.accessor<float, 1>();
    auto conv = out.at("conv1_1").accessor<double, 4>();
    auto relu = out.at("relu1_1").accessor<double, 4>();
    for (int k = 0; k < 64; k += 7) {
      double expected = ba[k];
      for (int c = 0; c < 3; ++c) {
        const double v = -kBackboneMean[c] / kBackboneStd[c];
        for (int i = 0; i < 3; ++i) {
          for (int j = 0; j < 3; ++j) expected += wa[k][c][i][j] * v;
        }
      }
      // Interior pixels see no zero padding.
      CHECK(conv[0][k][8][8] == doctest::Approx(expected).epsilon(1e-5));
      CHECK(conv[0][k][3][12] == doctest::Approx(expected).epsilon(1e-5));
      CHECK(relu[0][k][8][8] == doctest::Approx(std::max(0.0, expected)).epsilon(1e-5));
    }
  }

  TEST_CASE("state dict round trip and checksum pinning") {
    const auto dir = std::filesystem::temp_directory_path() / "fovrec_test_bb";
    BackboneConfig seeded;
    seeded.init_seed = 17;
    const Backbone a(seeded);
    a.save_state_dict(dir / "vgg19.pth");
    BackboneConfig from_file;
    from_file.weights_path = (dir / "vgg19.pth").string();
    from_file.weights_sha256 = sha256_file(dir / "vgg19.pth");
    const Backbone b(from_file);
    CHECK(b.weights_source() == "file:" + from_file.weights_sha256);
    torch::NoGradGuard guard;
    const auto x = torch::rand({1, 3, 32, 32});
    CHECK(torch::equal(a.forward(x, {"relu3_1"}).at("relu3_1"),
                       b.forward(x, {"relu3_1"}).at("relu3_1")));
    from_file.weights_sha256 = std::string(64, '0');
    CHECK_THROWS_AS(Backbone{from_file}, IoError);
  }

  TEST_CASE("sha256 of a known string") {
    const auto path = std::filesystem::temp_directory_path() / "fovrec_test_bb" / "abc.txt";
    std::filesystem::create_directories(path.parent_path());
    std::ofstream(path) << "abc";
    CHECK(sha256_file(path) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }

  TEST_CASE("gram of a constant single channel") {
    FeatureStack s;
    s.layers = {"x"};
    s.maps["x"] = torch::full({1, 1, 4, 5}, 3.0, torch::kFloat64);
    const GramSet g = gram_matrices(s);
    CHECK(g.entries.at("x").gram.item<double>() == doctest::Approx(9.0 * 20));
    CHECK(g.entries.at("x").positions == 20);
  }

  TEST_CASE("gram matches explicit loops and ignores spatial order") {
    const FeatureStack s = random_stack({"a"}, {3}, {4}, 5);
    const GramSet g = gram_matrices(s);
    const auto oracle = test::gram_by_loops(s.maps.at("a"));
    auto acc = g.entries.at("a").gram.accessor<double, 3>();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) CHECK(acc[0][i][j] == doctest::Approx(oracle[i][j]).epsilon(1e-12));
    }
    const auto perm = torch::randperm(16, torch::kLong);
    FeatureStack shuffled = s;
    shuffled.maps["a"] = s.maps.at("a").reshape({1, 3, 16}).index_select(2, perm).reshape({1, 3, 4, 4});
    const GramSet g2 = gram_matrices(shuffled);
    CHECK(torch::allclose(g.entries.at("a").gram, g2.entries.at("a").gram, 1e-12, 1e-12));
    const auto eig = torch::linalg_eigvalsh(g.entries.at("a").gram[0]);
    CHECK(eig.min().item<double>() > -1e-10);
  }

  TEST_CASE("gram loss formula") {
    FeatureStack a, b;
    a.layers = b.layers = {"x"};
    a.maps["x"] = torch::full({1, 1, 1, 1}, 2.0, torch::kFloat64);
    b.maps["x"] = torch::full({1, 1, 1, 1}, 1.0, torch::kFloat64);
    const GramSet ga = gram_matrices(a), gb = gram_matrices(b);
    // Grams 4 and 1 differ by d = 3.
    CHECK(gram_loss(ga, gb).item<double>() == doctest::Approx(9.0 / 4.0));
    CHECK(gram_loss(ga, ga).item<double>() == 0.0);

    const std::vector<std::string> names = {"l1", "l2"};
    const FeatureStack r1 = random_stack(names, {4, 6}, {5, 3}, 1);
    const FeatureStack r2 = random_stack(names, {4, 6}, {5, 3}, 2);
    const std::vector<double> w = {0.3, 1.7};
    const double got = gram_loss(gram_matrices(r1), gram_matrices(r2), w).item<double>();
    const double want = test::gram_loss_by_loops({r1.maps.at("l1"), r1.maps.at("l2")},
                                                 {r2.maps.at("l1"), r2.maps.at("l2")}, w);
    CHECK(std::abs(got - want) / want < 1e-10);
    CHECK(gram_loss(gram_matrices(r2), gram_matrices(r1), w).item<double>() ==
          doctest::Approx(got).epsilon(1e-14));
    FeatureStack other = r2;
    other.layers = {"l1"};
    CHECK_THROWS_AS(gram_loss(gram_matrices(r1), gram_matrices(other)), ValidationError);
  }

  TEST_CASE("gram loss gradient matches finite differences") {
    BackboneConfig cfg;
    cfg.dtype = torch::kFloat64;
    const Backbone net(cfg);
    const auto layers = style_layers();
    const auto target_img = torch::rand({1, 3, 32, 32}, torch::kFloat64);
    GramSet target;
    {
      torch::NoGradGuard guard;
      target = gram_matrices(extract_features(net, target_img, layers));
    }
    auto x = (0.25 + 0.5 * torch::rand({1, 3, 32, 32}, torch::kFloat64)).set_requires_grad(true);
    auto loss_at = [&](const torch::Tensor& img) {
      return gram_loss(gram_matrices(extract_features(net, img, layers)), target);
    };
    loss_at(x).backward();
    const auto grad = x.grad().clone();
    torch::NoGradGuard guard;
    const double h = 1e-5;
    int checked = 0;
    for (int probe = 0; probe < 10; ++probe) {
      const int c = probe % 3, y = (7 * probe + 3) % 32, xx = (11 * probe + 5) % 32;
      auto xp = x.detach().clone();
      auto xm = x.detach().clone();
      xp[0][c][y][xx] += h;
      xm[0][c][y][xx] -= h;
      const double fd = (loss_at(xp).item<double>() - loss_at(xm).item<double>()) / (2 * h);
      const double an = grad[0][c][y][xx].item<double>();
      CHECK(std::abs(fd - an) <= 1e-3 * std::max(std::abs(fd), 1e-12));
      ++checked;
    }
    CHECK(checked == 10);
  }
}
