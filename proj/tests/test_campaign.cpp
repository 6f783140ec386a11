#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crackmc/campaign.hpp"
#include "crackmc/errors.hpp"

using namespace crackmc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Small brittle bar that softens inside six steps; every campaign test
// starts from this and mutates the parsed json.
json baseline() {
  return json::parse(R"({
    "schema_version": 1,
    "model": {
      "dimension": 1,
      "box": {"lo": [0.0], "hi": [1.0]},
      "divisions": [12],
      "at_model": "at2",
      "material": {"E": 200e3, "nu": 0.3, "sigma_Y": 1e9, "psi_c": 0.1,
                   "l_f": 0.08}
    },
    "loading": {"steps": 6, "t_end": 1.0, "u_end": 2e-3},
    "solver": {"staggered_tol": 1e-8},
    "perturbation": {"mode": "homogeneous", "eta": {"psi_c": 0.02}},
    "sampling": {"samples": 4, "seed": 3, "threads": 1},
    "output": {"dir": ""}
  })");
}

std::string slurp(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is.good());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

fs::path fresh_dir(const char* name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

// step,mean,variance,ci_lo,ci_hi rows of summary.csv as doubles.
std::vector<std::array<double, 5>> read_summary(const fs::path& path) {
  std::ifstream is(path);
  REQUIRE(is.good());
  std::string line;
  std::getline(is, line);
  REQUIRE(line == "step,mean,variance,ci_lo,ci_hi");
  std::vector<std::array<double, 5>> rows;
  while (std::getline(is, line)) {
    std::array<double, 5> row{};
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    for (double& v : row) ls >> v;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST_CASE("config parsing round-trips every section") {
  json root = baseline();
  root["model"]["plasticity"] = true;
  root["model"]["void_scaling"] = 1e-3;
  root["loading"]["bc"] = "uniaxial_x";
  root["solver"] =
      json{{"staggered_tol", 1e-7}, {"max_staggered", 77}, {"newton_tol", 1e-9},
           {"max_newton", 12}, {"norm", "combined_rel"},
           {"early_stop",
            {{"enabled", true}, {"fraction", 0.02}, {"patience", 4}}}};
  root["perturbation"] = json{{"mode", "heterogeneous"},
                              {"eta", {{"psi_c", 0.03}, {"sigma_Y", 0.1}}}};
  root["microstructure"] =
      json{{"targets", {{"voids", 0.03}, {"inclusions", 0.02}}},
           {"void_radius", {0.02, 0.04}}, {"inclusion_radius", {0.02, 0.05}},
           {"gamma", 0.15}, {"max_attempts", 5000}, {"pair_rule", "all"}};
  root["sampling"] = json{{"samples", 9}, {"seed", 17}, {"threads", 2},
                          {"keep_per_sample", false}, {"variance", "unbiased"}};
  root["output"] = json{{"dir", "somewhere"}, {"write_fields", true}};
  root["rate_study"] = json{{"m_levels", {4, 8, 16, 32}}, {"replicates", 5},
                            {"h_divisions", {4, 8}}};
  root["model"]["dimension"] = 2;
  root["model"]["box"] = json{{"lo", {0.0, 0.0}}, {"hi", {2.0, 1.0}}};
  root["model"]["divisions"] = {6, 3};
  root["model"]["inclusion_material"] =
      json{{"E", 400e3}, {"nu", 0.25}, {"psi_c", 0.5}};

  const CampaignConfig cfg = parse_config(root.dump());
  CHECK(cfg.model.dimension == 2);
  CHECK(cfg.model.box.hi[0] == 2.0);
  CHECK(cfg.model.divisions == std::array<int, 2>{6, 3});
  CHECK(cfg.model.plasticity);
  CHECK(cfg.model.void_scaling == 1e-3);
  CHECK(cfg.model.material.model == AtModel::at2);
  CHECK(cfg.model.inclusion_material.has_value());
  CHECK(cfg.model.inclusion_material->K ==
        doctest::Approx(400e3 / (3 * (1 - 2 * 0.25))));
  CHECK(cfg.loading.steps == 6);
  CHECK(cfg.solver.max_staggered == 77);
  CHECK(cfg.solver.early_stop.patience == 4);
  CHECK(cfg.perturbation.mode == PerturbationMode::heterogeneous);
  CHECK(cfg.perturbation.eta.at("sigma_Y") == 0.1);
  REQUIRE(cfg.microstructure.has_value());
  CHECK(cfg.microstructure->target_inclusions == 0.02);
  CHECK(cfg.microstructure->pair_rule == PairEnlargement::all);
  CHECK(cfg.microstructure->max_attempts == 5000);
  CHECK(cfg.sampling.samples == 9);
  CHECK(cfg.sampling.threads == 2);
  CHECK_FALSE(cfg.sampling.keep_per_sample);
  CHECK(cfg.sampling.unbiased_variance);
  CHECK(cfg.output_dir == "somewhere");
  CHECK(cfg.write_fields);
  CHECK(cfg.rate_study.m_levels == std::vector<std::size_t>{4, 8, 16, 32});
  CHECK(cfg.rate_study.replicates == 5);
  CHECK(cfg.rate_study.h_divisions == std::vector<int>{4, 8});
}

TEST_CASE("config parsing rejects malformed input") {
  auto rejects = [](json root) {
    CHECK_THROWS_AS(parse_config(root.dump()), ConfigError);
  };
  SUBCASE("not json at all") {
    CHECK_THROWS_AS(parse_config("not json {"), ConfigError);
  }
  SUBCASE("missing schema_version") {
    json root = baseline();
    root.erase("schema_version");
    rejects(root);
  }
  SUBCASE("wrong schema_version") {
    json root = baseline();
    root["schema_version"] = 2;
    rejects(root);
  }
  SUBCASE("unknown top-level key") {
    json root = baseline();
    root["extra"] = 1;
    rejects(root);
  }
  SUBCASE("unknown model key") {
    json root = baseline();
    root["model"]["mesh_size"] = 0.1;
    rejects(root);
  }
  SUBCASE("unknown solver key") {
    json root = baseline();
    root["solver"]["tol"] = 1e-6;
    rejects(root);
  }
  SUBCASE("both stiffness parameterizations") {
    json root = baseline();
    root["model"]["material"]["K"] = 1e5;
    root["model"]["material"]["mu"] = 7e4;
    rejects(root);
  }
  SUBCASE("neither stiffness parameterization") {
    json root = baseline();
    root["model"]["material"].erase("E");
    root["model"]["material"].erase("nu");
    rejects(root);
  }
  SUBCASE("bad at_model") {
    json root = baseline();
    root["model"]["at_model"] = "at3";
    rejects(root);
  }
  SUBCASE("bad bc name") {
    json root = baseline();
    root["loading"]["bc"] = "shear_xy";
    rejects(root);
  }
  SUBCASE("box length mismatch") {
    json root = baseline();
    root["model"]["box"]["lo"] = {0.0, 0.0};
    rejects(root);
  }
  SUBCASE("bad variance name") {
    json root = baseline();
    root["sampling"]["variance"] = "bessel";
    rejects(root);
  }
  SUBCASE("bad pair rule") {
    json root = baseline();
    root["microstructure"] =
        json{{"targets", {{"voids", 0.01}}}, {"void_radius", {0.01, 0.02}},
             {"pair_rule", "some"}};
    rejects(root);
  }
  SUBCASE("negative perturbation amplitude") {
    json root = baseline();
    root["perturbation"]["eta"]["psi_c"] = -0.5;
    CHECK_THROWS_AS(parse_config(root.dump()).validate(), ConfigError);
  }
}

TEST_CASE("config hash covers the raw text") {
  const std::string a = baseline().dump();
  const std::string b = baseline().dump(2);  // same content, new whitespace
  std::string c = a;
  c.replace(c.find("\"seed\":3"), 8, "\"seed\":4");
  CHECK(config_hash(a) == config_hash(a));
  CHECK(config_hash(a) != config_hash(b));
  CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("full precision formatting survives a read back") {
  for (double v : {0.1, 1.0 / 3.0, 2.0 / 3.0e10, 1.2345678901234567e-300,
                   9.87654321e300, -0.0, 42.0, 5.1e-5}) {
    const std::string text = format_full(v);
    CHECK(std::strtod(text.c_str(), nullptr) == v);
  }
  CHECK(format_full(1.0) == "1");
}

TEST_CASE("single runs replay bitwise from their stream") {
  const CampaignConfig cfg = parse_config(baseline().dump());
  const QoICurve a = run_single(cfg, RandomStream(3, 0));
  const QoICurve b = run_single(cfg, RandomStream(3, 0));
  const QoICurve c = run_single(cfg, RandomStream(3, 1));
  REQUIRE(a.values.size() == b.values.size());
  for (std::size_t k = 0; k < a.values.size(); ++k)
    CHECK(a.values[k] == b.values[k]);
  bool differs = false;
  for (std::size_t k = 0; k < a.values.size(); ++k)
    if (a.values[k] != c.values[k]) differs = true;
  CHECK(differs);  // perturbation draws must decorrelate the samples
}

TEST_CASE("campaign writes the advertised files") {
  const fs::path dir = fresh_dir("crackmc_campaign_files");
  json root = baseline();
  root["output"]["write_fields"] = true;
  const std::string text = root.dump();
  const CampaignConfig cfg = parse_config(text);
  const CampaignResult result = run_campaign(cfg, dir.string(), text);

  CHECK(result.samples_requested == 4);
  CHECK(result.failures.empty());
  CHECK(result.master_seed == 3);
  CHECK(result.summary.samples == 4);
  REQUIRE(result.displacement.size() == 6);
  CHECK(result.displacement.back() == doctest::Approx(2e-3));

  for (int i = 0; i < 4; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%04d.csv", i);
    CHECK(fs::exists(dir / name));
    std::snprintf(name, sizeof(name), "fields_%04d.vtk", i);
    CHECK(fs::exists(dir / name));
  }
  const std::string sample0 = slurp(dir / "sample_0000.csv");
  CHECK(sample0.rfind("step,time,displacement,force\n", 0) == 0);

  const auto rows = read_summary(dir / "summary.csv");
  REQUIRE(rows.size() == 6);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    CHECK(rows[k][0] == static_cast<double>(k));
    CHECK(rows[k][2] >= 0.0);              // variance
    CHECK(rows[k][3] <= rows[k][1]);       // ci_lo <= mean
    CHECK(rows[k][1] <= rows[k][4]);       // mean <= ci_hi
    CHECK(std::isfinite(rows[k][1]));
  }

  const json manifest = json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest.at("schema_version") == 1);
  CHECK(manifest.at("qoi") == "reaction");
  CHECK(manifest.at("master_seed") == 3);
  CHECK(manifest.at("samples_requested") == 4);
  CHECK(manifest.at("samples_completed") == 4);
  CHECK(manifest.at("threads") == 1);
  CHECK(manifest.at("failures").empty());
  const std::string hash = manifest.at("config_hash");
  CHECK(hash.size() == 16);
  char expect[32];
  std::snprintf(expect, sizeof(expect), "%016llx",
                static_cast<unsigned long long>(config_hash(text)));
  CHECK(hash == expect);
  fs::remove_all(dir);
}

TEST_CASE("per-sample output can be switched off") {
  const fs::path dir = fresh_dir("crackmc_campaign_noper");
  json root = baseline();
  root["sampling"]["keep_per_sample"] = false;
  const std::string text = root.dump();
  run_campaign(parse_config(text), dir.string(), text);
  CHECK(fs::exists(dir / "summary.csv"));
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK_FALSE(fs::exists(dir / "sample_0000.csv"));
  fs::remove_all(dir);
}

TEST_CASE("summary bytes do not depend on the thread count") {
  const fs::path one = fresh_dir("crackmc_campaign_t1");
  const fs::path three = fresh_dir("crackmc_campaign_t3");
  json root = baseline();
  root["sampling"]["samples"] = 6;
  root["sampling"]["threads"] = 1;
  std::string text = root.dump();
  run_campaign(parse_config(text), one.string(), text);
  root["sampling"]["threads"] = 3;
  text = root.dump();
  run_campaign(parse_config(text), three.string(), text);

  CHECK(slurp(one / "summary.csv") == slurp(three / "summary.csv"));
  for (int i = 0; i < 6; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%04d.csv", i);
    CHECK(slurp(one / name) == slurp(three / name));
  }
  fs::remove_all(one);
  fs::remove_all(three);
}

TEST_CASE("unbiased variance rescales the population value") {
  const fs::path pop = fresh_dir("crackmc_campaign_pop");
  const fs::path unb = fresh_dir("crackmc_campaign_unb");
  json root = baseline();
  std::string text = root.dump();
  run_campaign(parse_config(text), pop.string(), text);
  root["sampling"]["variance"] = "unbiased";
  text = root.dump();
  run_campaign(parse_config(text), unb.string(), text);

  const auto rows_pop = read_summary(pop / "summary.csv");
  const auto rows_unb = read_summary(unb / "summary.csv");
  REQUIRE(rows_pop.size() == rows_unb.size());
  const double m = 4.0;
  for (std::size_t k = 0; k < rows_pop.size(); ++k) {
    CHECK(rows_unb[k][1] == rows_pop[k][1]);  // mean untouched
    CHECK(rows_unb[k][2] ==
          doctest::Approx(rows_pop[k][2] * m / (m - 1.0)).epsilon(1e-14));
    const double half = 1.96 * std::sqrt(rows_unb[k][2] / m);
    CHECK(rows_unb[k][3] ==
          doctest::Approx(rows_unb[k][1] - half).epsilon(1e-12));
    CHECK(rows_unb[k][4] ==
          doctest::Approx(rows_unb[k][1] + half).epsilon(1e-12));
  }
  fs::remove_all(pop);
  fs::remove_all(unb);
}

TEST_CASE("failed samples are recorded and kept out of the estimators") {
  const fs::path dir = fresh_dir("crackmc_campaign_fail");
  json root = baseline();
  root["model"]["dimension"] = 2;
  root["model"]["box"] = json{{"lo", {0.0, 0.0}}, {"hi", {1.0, 1.0}}};
  root["model"]["divisions"] = {6, 6};
  root["loading"]["u_end"] = 1e-4;
  root["loading"]["steps"] = 2;
  root["model"]["material"]["psi_c"] = 1e9;  // keep the solve elastic
  root["microstructure"] =
      json{{"targets", {{"voids", 0.32}}}, {"void_radius", {0.05, 0.09}},
           {"gamma", 0.35}, {"max_attempts", 200}};
  root["sampling"] = json{{"samples", 8}, {"seed", 11}, {"threads", 2}};
  const std::string text = root.dump();
  const CampaignResult result = run_campaign(parse_config(text), dir.string(),
                                             text);

  REQUIRE(!result.failures.empty());
  REQUIRE(result.failures.size() < 8);
  CHECK(result.summary.samples == 8 - result.failures.size());
  for (const SampleFailure& f : result.failures) {
    CHECK(f.sample == f.stream_id);
    CHECK(f.error.find("saturated") != std::string::npos);
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%04zu.csv", f.sample);
    CHECK_FALSE(fs::exists(dir / name));
  }

  const json manifest = json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest.at("failures").size() == result.failures.size());
  CHECK(manifest.at("samples_completed") ==
        8 - static_cast<int>(result.failures.size()));
  CHECK(manifest.at("failures")[0].contains("error"));

  // Same seeds, generous attempt budget: everything packs and the sample
  // set grows, so the failures were attempt-bound, not systematic.
  json relaxed = json::parse(text);
  relaxed["microstructure"]["max_attempts"] = 100000;
  const std::string text2 = relaxed.dump();
  const CampaignResult full = run_campaign(parse_config(text2), "", text2);
  CHECK(full.failures.empty());
  CHECK(full.summary.samples == 8);
  fs::remove_all(dir);
}

TEST_CASE("a campaign with no surviving samples throws") {
  json root = baseline();
  root["model"]["dimension"] = 2;
  root["model"]["box"] = json{{"lo", {0.0, 0.0}}, {"hi", {1.0, 1.0}}};
  root["model"]["divisions"] = {4, 4};
  root["microstructure"] =
      json{{"targets", {{"voids", 0.45}, {"inclusions", 0.45}}},
           {"void_radius", {0.05, 0.09}}, {"inclusion_radius", {0.05, 0.09}},
           {"max_attempts", 200}};
  root["sampling"]["samples"] = 3;
  const std::string text = root.dump();
  try {
    run_campaign(parse_config(text), "", text);
    FAIL("expected NumericalError");
  } catch (const NumericalError& err) {
    const std::string what = err.what();
    CHECK(what.find("all 3 samples failed") != std::string::npos);
  }
}

TEST_CASE("rate study populates both branches and writes reports") {
  const fs::path dir = fresh_dir("crackmc_rates");
  json root = baseline();
  root["model"]["material"]["psi_c"] = 1e9;  // elastic, fast forward runs
  root["loading"]["steps"] = 2;
  root["perturbation"] = json{{"mode", "homogeneous"}, {"eta", {{"E", 3e4}}}};
  root["sampling"]["threads"] = 2;
  root["rate_study"] = json{{"m_levels", {4, 8, 16, 32}}, {"replicates", 4},
                            {"h_divisions", {4, 8, 16}}};
  const std::string text = root.dump();
  const RateStudyResult result =
      run_rate_study(parse_config(text), dir.string(), text);

  REQUIRE(result.rms_per_m.size() == 4);
  for (const auto& [m, rms] : result.rms_per_m) {
    CHECK(rms > 0.0);
    CHECK(std::isfinite(rms));
  }
  CHECK(result.reference > 0.0);
  CHECK(std::isfinite(result.statistical.slope));
  CHECK(result.statistical.slope < 0.0);  // error shrinks with samples

  REQUIRE(result.spatial.has_value());
  CHECK(result.spatial->slope == doctest::Approx(2.0).epsilon(0.1));
  REQUIRE(result.errors_h.size() == 3);
  CHECK(result.errors_h[0].first < result.errors_h[2].first);

  CHECK(fs::exists(dir / "rates_mc.csv"));
  CHECK(fs::exists(dir / "rates_h.csv"));
  const json report = json::parse(slurp(dir / "rates.json"));
  CHECK(report.at("schema_version") == 1);
  CHECK(report.at("statistical").contains("slope"));
  CHECK(report.at("spatial").at("slope").get<double>() ==
        doctest::Approx(2.0).epsilon(0.1));
  fs::remove_all(dir);

  json thin = json::parse(text);
  thin["rate_study"]["m_levels"] = {8, 16, 32};
  const std::string text3 = thin.dump();
  CHECK_THROWS_AS(run_rate_study(parse_config(text3), "", text3), ConfigError);
}

TEST_CASE("heterogeneous two-phase campaign completes") {
  const fs::path dir = fresh_dir("crackmc_campaign_2d");
  json root = baseline();
  root["model"]["dimension"] = 2;
  root["model"]["box"] = json{{"lo", {0.0, 0.0}}, {"hi", {1.0, 1.0}}};
  root["model"]["divisions"] = {6, 6};
  root["model"]["inclusion_material"] =
      json{{"E", 400e3}, {"nu", 0.3}, {"psi_c", 0.4}, {"l_f", 0.08}};
  root["microstructure"] =
      json{{"targets", {{"voids", 0.05}, {"inclusions", 0.05}}},
           {"void_radius", {0.06, 0.1}}, {"inclusion_radius", {0.06, 0.1}}};
  root["perturbation"] = json{{"mode", "heterogeneous"},
                              {"eta", {{"psi_c", 0.03}}}};
  root["loading"]["u_end"] = 1e-3;
  root["loading"]["steps"] = 3;
  root["sampling"]["samples"] = 2;
  const std::string text = root.dump();
  const CampaignResult result = run_campaign(parse_config(text), dir.string(),
                                             text);
  CHECK(result.failures.empty());
  CHECK(result.summary.samples == 2);
  for (double v : result.summary.mean.values) {
    CHECK(std::isfinite(v));
    CHECK(v > 0.0);
  }
  CHECK(fs::exists(dir / "summary.csv"));
  fs::remove_all(dir);
}

TEST_CASE("campaign validation rejects inconsistent settings") {
  CampaignConfig cfg = parse_config(baseline().dump());
  SUBCASE("no samples") {
    cfg.sampling.samples = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("negative threads") {
    cfg.sampling.threads = -2;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("bad load target") {
    cfg.loading.u_end = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("bad step count") {
    cfg.loading.steps = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
}
