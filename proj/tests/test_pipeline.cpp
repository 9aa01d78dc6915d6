#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hkends/distance.hpp"
#include "hkends/pipeline.hpp"
#include "hkends/scenario.hpp"
#include "test_util.hpp"

using namespace hkends;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hkends_test_" + name);
  fs::remove_all(p);
  return p;
}

const CriterionResult* find(const VerificationReport& r, const std::string& name) {
  for (const auto& c : r.criteria) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

}  // namespace

TEST_CASE("fig2 report carries prediction, fit and provenance") {
  const Scenario s = load_scenario("fig2_cones");
  const auto rep = run_pipeline(s);
  REQUIRE(rep.prediction_available);
  CHECK(rep.predicted.a == doctest::Approx(2.0));
  REQUIRE(!rep.series.empty());
  CHECK(rep.series.front().fitted);
  CHECK(rep.series.front().fit.a == doctest::Approx(2.0).epsilon(0.075));
  CHECK(rep.dx == s.dx);
  CHECK(rep.seed == s.seed);
  CHECK(rep.cells > 0);
  const std::string text = rep.summary();
  CHECK(text.find("seed") != std::string::npos);
  CHECK(text.find("thresholds") != std::string::npos);
  REQUIRE(find(rep, "oo.a") != nullptr);
  CHECK(find(rep, "oo.a")->passed);
  CHECK(find(rep, "envelope.sandwich") != nullptr);
}

TEST_CASE("reruns are bit-identical") {
  const Scenario s = load_scenario("fig2_cones");
  const fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
  PipelineOptions oa, ob;
  oa.out_dir = a.string();
  ob.out_dir = b.string();
  const auto ra = run_pipeline(s, oa);
  const auto rb = run_pipeline(s, ob);
  CHECK(ra.summary() == rb.summary());
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    CAPTURE(e.path().filename().string());
    CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
    ++files;
  }
  CHECK(files >= 4);
  CHECK(fs::exists(a / "summary.txt"));
  CHECK(fs::exists(a / "envelope.csv"));
  CHECK(fs::exists(a / "profile.csv"));
  CHECK(fs::exists(a / "series_oo.csv"));
  CHECK(slurp(a / "series_oo.csv").rfind("t,p,stderr", 0) == 0);
  REQUIRE(ra.monte_carlo.ran);
  CHECK(ra.monte_carlo.mc.estimate == rb.monte_carlo.mc.estimate);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("a different seed changes only the Monte Carlo numbers") {
  Scenario s = load_scenario("fig2_cones");
  s.series.clear();
  const auto r1 = run_pipeline(s);
  s.seed += 1;
  const auto r2 = run_pipeline(s);
  CHECK(r1.monte_carlo.fd == r2.monte_carlo.fd);
  CHECK(r1.monte_carlo.mc.estimate != r2.monte_carlo.mc.estimate);
}

TEST_CASE("stage errors name the stage") {
  json j = json::parse(bundled_scenario_text("fig4_strip"));
  j["series"][0]["x"] = json{{"x", 1e6}, {"y", 0.0}};
  const Scenario bad_probe = parse_scenario(j.dump());
  try {
    run_pipeline(bad_probe);
    FAIL("expected a StageError");
  } catch (const StageError& e) {
    CHECK(e.stage() == "geometry");
    CHECK(e.kind() == ErrorKind::OutsideDomain);
    CHECK(std::string(e.what()).find("geometry") != std::string::npos);
  }

  // Too coarse for the narrow cone.
  j = json::parse(bundled_scenario_text("cases_1_2_3"));
  j["grid"]["dx"] = 2.0;
  const Scenario coarse = parse_scenario(j.dump());
  try {
    run_pipeline(coarse);
    FAIL("expected a StageError");
  } catch (const StageError& e) {
    CHECK(e.stage() == "geometry");
    CHECK(e.kind() == ErrorKind::ResolutionTooCoarse);
  }

  // A file where the output directory should go.
  const fs::path blocker = scratch("blocker");
  std::ofstream(blocker) << "x";
  PipelineOptions opt;
  opt.out_dir = (blocker / "sub").string();
  try {
    run_pipeline(load_scenario("fig4_strip"), opt);
    FAIL("expected a StageError");
  } catch (const StageError& e) {
    CHECK(e.stage() == "output");
  }
  fs::remove(blocker);
}

TEST_CASE("profile-only runs skip the later stages") {
  PipelineOptions opt;
  opt.envelope = opt.solve = opt.fit = opt.compare = false;
  const auto rep = run_pipeline(load_scenario("parabola_pair"), opt);
  CHECK(rep.series.empty());
  CHECK(rep.criteria.empty());
  CHECK(rep.profile.boundary_violation == 0.0);
  CHECK(rep.profile.bands.size() == 2);
}

TEST_CASE("calibration brackets every anchor at full coverage") {
  SandwichResult sw;
  for (int k = 0; k < 12; ++k) {
    EnvelopeSample e;
    e.t = 1.0 + k;
    e.shape.same_end_gaussian = 1.0 + 0.1 * k;
    e.shape.d_empty = 0.5 * k;
    e.shape.d_plus = kInfinity;
    e.p = 3.0 * e.shape.same_end_gaussian * std::exp(-0.2 * e.shape.d_empty * e.shape.d_empty / e.t) * (1.0 + 0.05 * (k % 3));
    sw.samples.push_back(e);
  }
  std::vector<std::size_t> all(sw.samples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  calibrate_sandwich(sw, all, 1.0);
  CHECK(sw.calibrated);
  CHECK(sw.coverage == 1.0);
  for (const auto& e : sw.samples) {
    CHECK(e.lower <= e.p * (1 + 1e-12));
    CHECK(e.p <= e.upper * (1 + 1e-12));
  }
  CHECK(sw.max_ratio < 1.2);
}
