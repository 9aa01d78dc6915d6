#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>

#include "hkends/pipeline.hpp"
#include "hkends/scenario.hpp"

using namespace hkends;

namespace {

struct Overrides {
  std::string scenario;
  std::optional<double> dx, rmax, tmax;
  std::optional<std::uint64_t> seed;
  std::optional<bool> implicit;
  std::string out;
};

void add_common(CLI::App* cmd, Overrides& o, bool with_out = true) {
  cmd->add_option("--scenario", o.scenario, "Bundled scenario name or path to a JSON file")->required();
  cmd->add_option("--dx", o.dx, "Cell size on the core circle")->check(CLI::PositiveNumber);
  cmd->add_option("--rmax", o.rmax, "Truncation radius")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "Monte Carlo seed");
  cmd->add_option("--tmax", o.tmax, "Cap on every simulated time")->check(CLI::PositiveNumber);
  cmd->add_flag("--implicit,!--explicit", o.implicit, "Backward-Euler (implicit) or explicit stepping");
  if (with_out) cmd->add_option("--out", o.out, "Directory for CSV artifacts and the summary");
}

Scenario apply(Scenario s, const Overrides& o) {
  if (o.dx) s.dx = *o.dx;
  if (o.rmax) s.r_max = *o.rmax;
  if (o.seed) s.seed = *o.seed;
  if (o.implicit) s.implicit = *o.implicit;
  if (o.tmax) {
    for (auto& x : s.series) {
      x.t_max = std::min(x.t_max, *o.tmax);
      if (!(x.t_max > x.t_min)) {
        throw Error(ErrorKind::InvalidArgument, "--tmax leaves no time range for series " + x.name);
      }
    }
    auto& t = s.envelope.times;
    t.erase(std::remove_if(t.begin(), t.end(), [&](double v) { return v > *o.tmax; }), t.end());
    s.monte_carlo.t = std::min(s.monte_carlo.t, *o.tmax);
  }
  return s;
}

std::vector<Scenario> load(const Overrides& o, bool variants) {
  const Scenario base = load_scenario(o.scenario);
  std::vector<Scenario> out;
  for (const auto& s : variants ? expand_variants(base) : std::vector<Scenario>{base}) out.push_back(apply(s, o));
  return out;
}

std::string out_dir(const Overrides& o, const Scenario& s, bool many) {
  if (o.out.empty()) return {};
  return many ? (std::filesystem::path(o.out) / s.name).string() : o.out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heat kernel estimates on manifolds with ends"};
  app.require_subcommand(1);

  auto* list = app.add_subcommand("list", "List the bundled scenarios");

  std::string describe_name;
  auto* desc = app.add_subcommand("describe", "Describe a scenario");
  desc->add_option("name", describe_name, "Bundled scenario name");
  desc->add_option("--scenario", describe_name, "Bundled scenario name or path to a JSON file");

  Overrides po, eo, so, vo;
  auto* profile = app.add_subcommand("profile", "Solve and check the harmonic profile");
  add_common(profile, po);
  auto* estimate = app.add_subcommand("estimate", "Evaluate the envelope pieces on the sweep");
  add_common(estimate, eo);
  auto* simulate = app.add_subcommand("simulate", "Run the finite-difference series and the Monte Carlo check");
  add_common(simulate, so);
  auto* verify = app.add_subcommand("verify", "Run every stage and report pass/fail per criterion");
  add_common(verify, vo);
  bool no_variants = false;
  verify->add_flag("--no-variants", no_variants, "Skip the scenario's variants");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*list) {
      for (const auto& n : list_scenarios()) std::cout << n << "\n";
      return 0;
    }
    if (*desc) {
      if (describe_name.empty()) throw Error(ErrorKind::InvalidArgument, "describe needs a scenario name");
      std::cout << describe(load_scenario(describe_name));
      return 0;
    }
    if (*profile || *estimate || *simulate) {
      const Overrides& o = *profile ? po : *estimate ? eo : so;
      PipelineOptions opt;
      opt.envelope = !!*estimate;
      opt.solve = !!*simulate;
      opt.fit = !!*simulate;
      opt.compare = false;
      const auto scenarios = load(o, false);
      opt.out_dir = out_dir(o, scenarios.front(), false);
      const auto rep = run_pipeline(scenarios.front(), opt);
      std::cout << rep.summary();
      return 0;
    }
    if (*verify) {
      const auto scenarios = load(vo, !no_variants);
      bool ok = true;
      for (const auto& s : scenarios) {
        PipelineOptions opt;
        opt.out_dir = out_dir(vo, s, scenarios.size() > 1);
        const auto rep = run_pipeline(s, opt);
        std::cout << rep.summary() << "\n";
        ok = ok && rep.passed();
      }
      return ok ? 0 : 1;
    }
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
