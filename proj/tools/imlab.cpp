#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "imlab/error.hpp"
#include "imlab/harness.hpp"
#include "imlab/io.hpp"

namespace {

std::vector<int> parse_grid(const std::string& text) {
  std::vector<int> counts;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto x = text.find_first_of("xX", start);
    const std::string part = text.substr(start, x == std::string::npos ? std::string::npos : x - start);
    std::size_t used = 0;
    int n = 0;
    try {
      n = std::stoi(part, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (part.empty() || used != part.size()) {
      throw imlab::Error(imlab::ErrorCode::BadConfig, "--grid expects N or NxM, got '" + text + "'");
    }
    counts.push_back(n);
    if (x == std::string::npos) break;
    start = x + 1;
  }
  return counts;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"imlab: stretching and bending energies of immersed sheets"};
  std::string experiment, config, out, grid;
  double p = 0.0;
  std::uint64_t seed = 0;
  app.add_option("experiment", experiment, "energy | check | reconstruct | minimize | stability-sweep | ratio-study")
      ->required()
      ->check(CLI::IsMember({"energy", "check", "reconstruct", "minimize", "stability-sweep", "ratio-study"}));
  app.add_option("--config", config, "JSON configuration file")->required();
  auto* out_opt = app.add_option("--out", out, "output directory");
  auto* grid_opt = app.add_option("--grid", grid, "node counts, N or NxM");
  auto* p_opt = app.add_option("--p", p, "energy exponent");
  auto* seed_opt = app.add_option("--seed", seed, "random seed");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    nlohmann::json j = nlohmann::json::parse(imlab::read_file(config));
    if (!j.is_object()) throw imlab::Error(imlab::ErrorCode::BadConfig, "config must be a JSON object");
    j["experiment"] = experiment;
    if (*out_opt) j["out"] = out;
    if (*grid_opt) j["grid"] = parse_grid(grid);
    if (*p_opt) j["p"] = p;
    if (*seed_opt) j["seed"] = seed;
    const imlab::ExperimentConfig cfg = imlab::parse_config(j);
    const int code = imlab::run_experiment(cfg);
    if (code == 2) std::fprintf(stderr, "imlab: one or more checks failed\n");
    return code;
  } catch (const imlab::Error& e) {
    std::fprintf(stderr, "imlab: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "imlab: %s\n", e.what());
    return 1;
  }
}
