#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "crackmc/campaign.hpp"
#include "crackmc/errors.hpp"
#include "crackmc/microstructure.hpp"

namespace {

using crackmc::CampaignConfig;

struct CommonArgs {
  std::string config_path;
  std::optional<std::size_t> samples;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_overrides) {
  cmd->add_option("--config", args.config_path, "campaign config (JSON)")
      ->required();
  if (with_overrides) {
    cmd->add_option("--samples", args.samples, "override sampling.samples");
    cmd->add_option("--seed", args.seed, "override sampling.seed");
    cmd->add_option("--threads", args.threads,
                    "override sampling.threads (0 = hardware)");
  }
  cmd->add_option("--out", args.out, "override output directory / file");
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw crackmc::IoError("cannot open config file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

CampaignConfig configure(const CommonArgs& args, std::string& text) {
  text = slurp(args.config_path);
  CampaignConfig config = crackmc::parse_config(text);
  if (args.samples) config.sampling.samples = *args.samples;
  if (args.seed) config.sampling.seed = *args.seed;
  if (args.threads) config.sampling.threads = *args.threads;
  if (args.out) config.output_dir = *args.out;
  config.validate();
  return config;
}

int run_verb(const CommonArgs& args) {
  std::string text;
  const CampaignConfig config = configure(args, text);
  const crackmc::CampaignResult result =
      crackmc::run_campaign(config, config.output_dir, text);
  const std::size_t done = result.samples_requested - result.failures.size();
  double peak_mean = 0.0;
  for (double v : result.summary.mean.values)
    peak_mean = std::max(peak_mean, std::abs(v));
  std::cout << "completed " << done << "/" << result.samples_requested
            << " samples";
  if (!result.failures.empty())
    std::cout << " (" << result.failures.size() << " failed)";
  std::cout << "\npeak mean reaction " << crackmc::format_full(peak_mean)
            << "\nresults in " << config.output_dir << "\n";
  return 0;
}

int rates_verb(const CommonArgs& args) {
  std::string text;
  const CampaignConfig config = configure(args, text);
  const crackmc::RateStudyResult result =
      crackmc::run_rate_study(config, config.output_dir, text);
  std::cout << "statistical slope " << result.statistical.slope;
  if (result.statistical.degenerate) std::cout << " (degenerate)";
  std::cout << "\n";
  if (result.spatial)
    std::cout << "spatial order " << result.spatial->slope << "\n";
  std::cout << "reports in " << config.output_dir << "\n";
  return 0;
}

int pack_verb(const CommonArgs& args) {
  std::string text;
  CampaignConfig config = configure(args, text);
  if (!config.microstructure)
    throw crackmc::ConfigError(
        "pack: config has no microstructure section");

  crackmc::AllocationSpec spec;
  spec.box = config.model.box;
  spec.box.dim = 2;
  spec.void_radius = config.microstructure->void_radius;
  spec.inclusion_radius = config.microstructure->inclusion_radius;
  spec.target_voids = config.microstructure->target_voids;
  spec.target_inclusions = config.microstructure->target_inclusions;
  spec.gamma = config.microstructure->gamma;
  spec.max_attempts = config.microstructure->max_attempts;
  spec.pair_rule = config.microstructure->pair_rule;

  crackmc::RandomStream stream(config.sampling.seed, 0);
  const crackmc::Microstructure ms = crackmc::allocate(spec, stream);

  std::filesystem::path out_path;
  if (args.out && std::filesystem::path(*args.out).has_extension()) {
    out_path = *args.out;
  } else {
    out_path = std::filesystem::path(config.output_dir) / "microstructure.txt";
  }
  if (out_path.has_parent_path())
    std::filesystem::create_directories(out_path.parent_path());
  std::ofstream os(out_path);
  if (!os)
    throw crackmc::IoError("cannot write '" + out_path.string() + "'");
  crackmc::write_particles(os, ms);

  const auto [voids, inclusions] = crackmc::achieved_fractions(ms);
  std::cout << ms.particles.size() << " particles\nvoid fraction "
            << crackmc::format_full(voids) << "\ninclusion fraction "
            << crackmc::format_full(inclusions) << "\nwritten to "
            << out_path.string() << "\n";
  return 0;
}

int validate_verb(const CommonArgs& args) {
  std::string text;
  (void)configure(args, text);
  std::cout << "config ok\n";
  return 0;
}

void print_error(const char* kind, const std::string& message) {
  nlohmann::ordered_json record;
  record["error"] = kind;
  record["message"] = message;
  std::cerr << record.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stochastic phase-field fracture campaigns"};
  app.require_subcommand(1);

  CommonArgs run_args, rates_args, pack_args, validate_args;
  CLI::App* run_cmd =
      app.add_subcommand("run", "run a Monte Carlo campaign");
  add_common(run_cmd, run_args, true);
  CLI::App* rates_cmd =
      app.add_subcommand("rates", "convergence-rate study");
  add_common(rates_cmd, rates_args, true);
  CLI::App* pack_cmd =
      app.add_subcommand("pack", "draw one particle packing");
  add_common(pack_cmd, pack_args, true);
  CLI::App* validate_cmd =
      app.add_subcommand("validate-config", "check a config file");
  add_common(validate_cmd, validate_args, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return run_verb(run_args);
    if (rates_cmd->parsed()) return rates_verb(rates_args);
    if (pack_cmd->parsed()) return pack_verb(pack_args);
    if (validate_cmd->parsed()) return validate_verb(validate_args);
  } catch (const crackmc::PackingSaturated& err) {
    nlohmann::ordered_json record;
    record["error"] = "PackingSaturated";
    record["message"] = err.what();
    record["achieved_voids"] = err.achieved_voids;
    record["achieved_inclusions"] = err.achieved_inclusions;
    std::cerr << record.dump() << "\n";
    return 3;
  } catch (const crackmc::ConfigError& err) {
    print_error("ConfigError", err.what());
    return 2;
  } catch (const crackmc::ArgumentError& err) {
    print_error("ArgumentError", err.what());
    return 2;
  } catch (const crackmc::NumericalError& err) {
    print_error("NumericalError", err.what());
    return 3;
  } catch (const crackmc::IoError& err) {
    print_error("IoError", err.what());
    return 4;
  } catch (const std::exception& err) {
    print_error("Error", err.what());
    return 1;
  }
  return 0;
}
