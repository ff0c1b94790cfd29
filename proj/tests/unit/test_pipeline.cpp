#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "fovrec/errors.hpp"
#include "fovrec/image.hpp"
#include "fovrec/pipeline.hpp"
#include "fovrec/plot.hpp"

using namespace fovrec;
using nlohmann::json;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "fovrec_test_pipeline" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("plot draws one line per method and covers the data") {
  const auto dir = fresh_dir("plot");
  std::ofstream csv(dir / "sweep.csv");
  csv << "method,boundary_deg,detection_rate\n";
  for (int b = 9; b <= 22; ++b) {
    csv << "ground-truth," << b << "," << 0.5 << "\n";
    csv << "l2," << b << "," << 0.5 + 0.02 * (b - 9) << "\n";
  }
  csv.close();
  const PlotSummary s = plot_curves(dir / "sweep.csv", dir / "sweep.png");
  CHECK(s.lines == 2);
  CHECK(s.x_min <= 9.0);
  CHECK(s.x_max >= 22.0);
  CHECK(s.y_min <= 0.5);
  CHECK(s.y_max >= 0.5 + 0.02 * 13);
  const ImagePatch png = read_image(dir / "sweep.png");
  CHECK(png.width() > 0);
  CHECK(png.height() > 0);
}

TEST_CASE("plot rejects empty and malformed input") {
  const auto dir = fresh_dir("plot_bad");
  write(dir / "empty.csv", "");
  CHECK_THROWS_AS(plot_curves(dir / "empty.csv", dir / "a.png"), ValidationError);
  write(dir / "header.csv", "method,boundary_deg,detection_rate\n");
  CHECK_THROWS_AS(plot_curves(dir / "header.csv", dir / "b.png"), ValidationError);
  write(dir / "bad.csv", "method,boundary_deg,detection_rate\nl2,9,0.5\nl2,ten,0.5\n");
  try {
    plot_curves(dir / "bad.csv", dir / "c.png");
    FAIL("malformed CSV accepted");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }
  CHECK_THROWS_AS(plot_curves(dir / "missing.csv", dir / "d.png"), IoError);
}

TEST_CASE("config layers: defaults < files < overrides") {
  const auto dir = fresh_dir("layers");
  write(dir / "a.json", R"({"cohort": "naive", "train": {"batch_size": 8, "lr": 1e-4}})");
  write(dir / "b.json", R"({"train": {"batch_size": 6}, "evaluation": {"boundaries": [10, 12]}})");
  const PipelineConfig c =
      layered_config({dir / "a.json", dir / "b.json"}, {"train.batch_size=4", "seeds.train=99"});
  CHECK(c.cohort == "naive");
  CHECK(c.train.batch_size == 4);
  CHECK(c.train.lr == doctest::Approx(1e-4));
  CHECK(c.boundaries == std::vector<double>{10, 12});
  CHECK(c.seeds.train == 99);
  const PipelineConfig d;
  CHECK(c.train.n_critic == d.train.n_critic);
  CHECK(c.patch_size == d.patch_size);
  CHECK(c.thresholds().at(8) == doctest::Approx(7.93));
}

TEST_CASE("config serialization round-trips and shows every default") {
  PipelineConfig c;
  c.cohort = "naive";
  c.threshold_override = {{8, 5.0}, {14, 3.0}, {20, 1.0}};
  c.variants = {"lpips", "lapl-M*"};
  c.observer.beta = 2.5;
  const json j = c.to_json();
  const PipelineConfig back = PipelineConfig::from_json(j);
  CHECK(back.to_json() == j);
  CHECK(back.thresholds().at(14) == doctest::Approx(3.0));
  for (const char* key : {"paths", "cohort", "partition", "display", "rates", "datasets",
                          "synthesis", "train", "variants", "evaluation", "calibration", "seeds"}) {
    CHECK(j.contains(key));
  }
}

TEST_CASE("config rejects unknown keys and invalid values") {
  CHECK_THROWS_AS(layered_config({}, {"train.batch_sise=4"}), ValidationError);
  CHECK_THROWS_AS(layered_config({}, {"no-equals-sign"}), ValidationError);
  CHECK_THROWS_AS(layered_config({}, {"cohort=martian"}), ValidationError);
  CHECK_THROWS_AS(layered_config({}, {"variants=[\"l3\"]"}), ValidationError);
  CHECK_THROWS_AS(layered_config({}, {"datasets.patch_size=100"}), ValidationError);
  CHECK_THROWS_AS(layered_config({"/nonexistent/config.json"}, {}), IoError);
}

TEST_CASE("missing image directory fails at the first stage") {
  const auto dir = fresh_dir("missing_images");
  PipelineConfig c;
  c.images = dir / "no-such-dir";
  c.work_dir = dir / "run";
  try {
    run_end_to_end(c);
    FAIL("run succeeded without images");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("stage build-dataset") != std::string::npos);
  }
  std::ifstream in(c.work_dir / "report.json");
  const json report = json::parse(in);
  REQUIRE(report["stages"].size() == 8);
  CHECK(report["stages"][0]["name"] == "build-dataset");
  CHECK(report["stages"][0]["status"] == "failed");
  for (std::size_t i = 1; i < 8; ++i) CHECK(report["stages"][i]["status"] == "skipped");
  CHECK_FALSE(std::filesystem::exists(c.work_dir / ".fovrec.lock"));
}

TEST_CASE("a locked work directory is refused") {
  const auto dir = fresh_dir("locked");
  PipelineConfig c;
  c.work_dir = dir;
  write(dir / ".fovrec.lock", "");
  CHECK_THROWS_AS(run_end_to_end(c), IoError);
  CHECK(std::filesystem::exists(dir / ".fovrec.lock"));
}

}  // TEST_SUITE
