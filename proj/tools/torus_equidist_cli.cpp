// torus-equidist: run experiments, hypothesis checks, demos, single orbits and
// dimension scans from the command line.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "torus_equidist/torus_equidist.hpp"

using namespace torus_equidist;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> precision_bits;
  bool no_svg = false;
};

void apply(const Overrides& o, ExperimentConfig& c) {
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.output_dir = *o.out;
  if (o.precision_bits) {
    if (*o.precision_bits < 8) throw ConfigError("/orbit/precision_bits", "must be >= 8");
    c.orbit.precision_bits = *o.precision_bits;
  }
  if (o.no_svg) c.svg = false;
}

int run_config(ExperimentConfig c, const Overrides& o) {
  apply(o, c);
  std::cerr << "run '" << c.name << "' -> " << c.output_dir << " (" << worker_count() << " workers)\n";
  const auto t0 = std::chrono::steady_clock::now();
  const RunResult r = run(c, &std::cerr);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cerr << "status " << r.report["status"].get<std::string>() << ", " << (r.report["pass"].get<bool>() ? "PASS" : "FAIL")
            << " in " << secs << " s\n";
  nlohmann::json summary{{"name", c.name}, {"status", r.report["status"]}, {"pass", r.report["pass"]},
                         {"output_dir", r.output_dir.string()}};
  for (const auto& [k, v] : r.report["analyses"].items()) summary["analyses"][k] = v["pass"];
  std::cout << summary.dump(2) << "\n";
  return r.exit_code;
}

TorusPoint parse_point(const std::string& x, const std::string& y) {
  try {
    return TorusPoint(BigRational::parse(x), BigRational::parse(y));
  } catch (const std::exception& e) {
    throw ConfigError("", std::string("bad starting point: ") + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Orbits of fractal measures under T_m x T_n on the 2-torus"};
  app.require_subcommand(1);
  Overrides ov;
  std::uint64_t seed = 0;
  std::string out;
  int bits = 0;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "Override the config seed");
    sub->add_option("--out", out, "Override the output directory");
    sub->add_option("--precision-bits", bits, "Override the orbit output precision (bits)");
    sub->add_flag("--no-svg", ov.no_svg, "Skip SVG plots");
  };

  std::string config_path, demo_name;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment config");
  run_cmd->add_option("config", config_path, "Config JSON")->required();
  add_common(run_cmd);

  auto* check_cmd = app.add_subcommand("check", "Print the hypothesis bundle for a config");
  check_cmd->add_option("config", config_path, "Config JSON")->required();
  check_cmd->add_option("--seed", seed, "Override the config seed");

  bool print_config = false;
  auto* demo_cmd = app.add_subcommand("demo", "Run a built-in demo");
  demo_cmd->add_option("name", demo_name, "Demo name")->required()->check(CLI::IsMember(demo_names()));
  demo_cmd->add_flag("--print-config", print_config, "Print the demo config and exit");
  add_common(demo_cmd);

  unsigned om = 2, on = 3;
  std::size_t olen = 1000, index = 0;
  std::string ox, oy;
  auto* orbit_cmd = app.add_subcommand("orbit", "Emit one orbit as CSV");
  orbit_cmd->add_option("--m", om, "x multiplier")->check(CLI::Range(2u, 65535u));
  orbit_cmd->add_option("--n", on, "y multiplier")->check(CLI::Range(2u, 65535u));
  orbit_cmd->add_option("--length", olen, "Orbit length N")->check(CLI::Range(std::size_t{1}, std::size_t{10000000}));
  orbit_cmd->add_option("--x", ox, "Rational x in [0,1), e.g. 1/3");
  orbit_cmd->add_option("--y", oy, "Rational y in [0,1)");
  orbit_cmd->add_option("--config", config_path, "Draw the start from this config's measure instead");
  orbit_cmd->add_option("--index", index, "Which typical orbit of the config (stream 200 + index)");
  add_common(orbit_cmd);

  auto* dims_cmd = app.add_subcommand("dims", "Dimension estimates for a config's measure");
  dims_cmd->add_option("config", config_path, "Config JSON")->required();
  add_common(dims_cmd);

  CLI11_PARSE(app, argc, argv);
  for (auto* sub : {run_cmd, demo_cmd, orbit_cmd, dims_cmd, check_cmd})
    if (sub->parsed()) {
      if (sub->count("--seed")) ov.seed = seed;
      if (sub->get_option_no_throw("--out") && sub->count("--out")) ov.out = out;
      if (sub->get_option_no_throw("--precision-bits") && sub->count("--precision-bits")) ov.precision_bits = bits;
    }

  try {
    if (run_cmd->parsed()) return run_config(load_config(config_path), ov);

    if (demo_cmd->parsed()) {
      if (print_config) {
        std::cout << demo_config_json(demo_name).dump(2) << "\n";
        return kExitPass;
      }
      return run_config(demo_config(demo_name), ov);
    }

    if (check_cmd->parsed()) {
      ExperimentConfig c = load_config(config_path);
      apply(ov, c);
      std::cout << to_json(check(c.measure, c.m, c.n, c.checks, c.seed)).dump(2) << "\n";
      return kExitPass;
    }

    if (dims_cmd->parsed()) {
      ExperimentConfig c = load_config(config_path);
      apply(ov, c);
      const EmpiricalMeasure2D cloud = sample_cloud(c.measure, c.dimension.samples, c.dimension.depth, derive_seed(c.seed, 300));
      nlohmann::json j{{"closed_form_dim_mu", entropy_dimension(c.measure)},
                       {"dim_mu", to_json(estimate_dimension(cloud))},
                       {"dim_P1", to_json(estimate_dimension(project(cloud, Projection::P1())))},
                       {"dim_P2", to_json(estimate_dimension(project(cloud, Projection::P2())))},
                       {"projection_search", to_json(condition_1_1_search(cloud, c.dimension.angles))}};
      std::cout << j.dump(2) << "\n";
      return kExitPass;
    }

    if (orbit_cmd->parsed()) {
      OrbitSpec os{om, on, olen, ov.precision_bits.value_or(64)};
      Orbit orbit;
      nlohmann::json side;
      if (!config_path.empty()) {
        ExperimentConfig c = load_config(config_path);
        apply(ov, c);
        os.m = c.m;
        os.n = c.n;
        os.output_precision_bits = c.orbit.precision_bits;
        const std::uint64_t s = derive_seed(c.seed, 200 + index);
        auto res = typical_orbit(c.measure, os, s);
        if (!is_certified(res)) res = typical_orbit(c.measure, os, s, 2);
        if (!is_certified(res)) throw PrecisionFailure(std::get<InsufficientPrecision>(res).detail);
        orbit = std::get<Orbit>(std::move(res));
        side = orbit_sidecar(os, orbit, s, spec_hash(c.measure));
      } else {
        if (ox.empty() || oy.empty()) throw ConfigError("", "orbit needs --x and --y, or --config");
        orbit = orbit_exact(parse_point(ox, oy), os);
        side = orbit_sidecar(os, orbit, 0, "");
        side["start"] = {ox, oy};
      }
      if (ov.out) {
        const std::filesystem::path dir(*ov.out);
        atomic_write_with(dir / "orbit.csv", [&](std::ostream& s) { write_orbit_csv(s, orbit); });
        atomic_write(dir / "orbit.json", side.dump(2) + "\n");
        std::cerr << "wrote " << (dir / "orbit.csv").string() << "\n";
      } else {
        write_orbit_csv(std::cout, orbit);
      }
      return kExitPass;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const PrecisionFailure& e) {
    std::cerr << "precision failure: " << e.what() << "\n";
    return kExitPrecision;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
