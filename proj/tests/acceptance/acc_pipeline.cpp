#include <chrono>
#include <filesystem>

#include "criteria.hpp"
#include "fovrec/pipeline.hpp"

namespace fovrec::acceptance {
namespace {

namespace fs = std::filesystem;

Outcome end_to_end_smoke() {
  const fs::path root = fs::temp_directory_path() / "fovrec_acceptance" / "smoke";
  fs::remove_all(root);
  const auto start = std::chrono::steady_clock::now();
  std::vector<nlohmann::json> reports;
  for (const char* run : {"first", "second"}) {
    PipelineConfig cfg = layered_config({FOVREC_SMOKE_CONFIG}, {});
    cfg.work_dir = root / run;
    reports.push_back(run_end_to_end(cfg).to_json());
  }
  const double minutes =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60.0;
  int ok = 0;
  std::string names;
  for (const auto& s : reports[0]["stages"]) {
    ok += s["status"] == "ok" ? 1 : 0;
    names += " " + s["name"].get<std::string>();
  }
  const int images = reports[0]["stages"][3]["metrics"]["images"].get<int>();
  const bool identical = reports[0] == reports[1];
  const int steps = reports[0]["stages"][2]["metrics"]["l2/near"]["steps"].get<int>();
  return {ok == static_cast<int>(reports[0]["stages"].size()) && identical && images == 10 &&
              steps == 200 && minutes <= 60.0,
          cat(ok, "/", reports[0]["stages"].size(), " stages ok (", names, " ), ", images,
              " images, ", steps, " training steps, reports ", identical ? "identical" : "differ",
              ", ", minutes, " min for both runs (limit 60)")};
}

const Registrar r13(13, "End-to-end smoke run", end_to_end_smoke);

}  // namespace
}  // namespace fovrec::acceptance
