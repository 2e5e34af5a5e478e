#pragma once

// Experiment configuration: JSON schema, defaults, and the resolved form
// written next to every run's outputs.

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "core.hpp"
#include "geometry.hpp"
#include "measure_spec.hpp"
#include "scenery.hpp"

namespace torus_equidist {

struct OrbitConfig {
  std::vector<std::size_t> Ns{1000, 10000, 100000};
  std::size_t M = 50;
  int precision_bits = 64;  // output precision of each orbit point
  std::size_t dump = 1;     // orbits written as CSV

  std::size_t length() const { return Ns.back(); }
};

enum class TargetKind { Auto, LambdaLambda, LambdaTimesMarginal };

struct EquidistConfig {
  bool enabled = true;
  int K = 8;
  TargetKind target = TargetKind::Auto;
  std::optional<double> tol;  // default: default_tolerance(N, M)
  bool expect_generic = true;
  double min_deviation = 0.3;  // non-generic runs pass when the deviation reaches this
  bool require_decreasing = true;
};

struct DimensionConfig {
  bool enabled = false;
  std::size_t samples = 100000;
  std::size_t depth = 40;
  std::vector<double> angles = default_angle_grid();
  std::map<std::string, std::array<double, 2>> bounds;  // "mu", "P1", "P2" or an angle in degrees
  std::optional<std::vector<double>> expect_flagged;
};

struct ConservationConfig {
  bool enabled = false;
  std::string projection = "P1";
  double max_residual = 0.15;
  std::size_t samples = 100000;
  std::size_t depth = 40;
};

struct SceneryConfig {
  bool enabled = false;
  std::optional<double> dt;  // default |log r_max| / 8
  std::size_t J = 64;
  std::size_t anchors = 4;
  std::size_t samples_per_level = 20000;
  std::vector<std::string> observables{"disk_mass"};
  std::vector<std::string> require;  // default: all listed observables
  std::optional<double> expected_frequency;
  std::optional<double> expected_inverse_log;  // frequency 1 / log(value)
  double tolerance_bins = 1.0;
};

struct ChecksConfig {
  bool enabled = true;
  long spectral_bound = 1000000;
  long spectral_bits = 512;
  bool search_projections = true;
  std::size_t samples = 100000;
  std::size_t depth = 40;
};

struct ExperimentConfig {
  std::string name = "experiment";
  MeasureSpec measure;
  unsigned m = 2, n = 2;
  OrbitConfig orbit;
  EquidistConfig equidist;
  DimensionConfig dimension;
  ConservationConfig conservation;
  SceneryConfig scenery;
  ChecksConfig checks;
  std::uint64_t seed = 1;
  std::string output_dir;  // default out/<name>
  bool svg = true;
};

inline const char* to_string(TargetKind t) {
  switch (t) {
    case TargetKind::LambdaLambda: return "lambda_lambda";
    case TargetKind::LambdaTimesMarginal: return "lambda_times_marginal";
    default: return "auto";
  }
}

/// Projection named by a bounds key: "P1", "P2" or degrees in (0, 180).
inline Projection projection_from_key(const std::string& key) {
  if (key == "P1") return Projection::P1();
  if (key == "P2") return Projection::P2();
  std::size_t used = 0;
  double deg = 0.0;
  try {
    deg = std::stod(key, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != key.size() || !(deg >= 0.0 && deg < 180.0))
    throw std::invalid_argument("projection key must be P1, P2 or degrees in [0, 180): '" + key + "'");
  return Projection::at_degrees(deg);
}

namespace detail {

inline std::string pointer_escape(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

/// Reads one JSON object; every key must be consumed or finish() rejects it.
class ObjectReader {
 public:
  ObjectReader(const nlohmann::json& j, std::string ptr) : j_(j), ptr_(std::move(ptr)) {
    if (!j_.is_object()) throw ConfigError(ptr_.empty() ? "/" : ptr_, "expected an object");
  }

  std::string at(const std::string& key) const { return ptr_ + "/" + pointer_escape(key); }

  const nlohmann::json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }

  const nlohmann::json& require(const std::string& key) {
    const auto* v = find(key);
    if (!v) throw ConfigError(at(key), "missing required field");
    return *v;
  }

  bool boolean(const std::string& key, bool def) {
    const auto* v = find(key);
    if (!v) return def;
    if (!v->is_boolean()) throw ConfigError(at(key), "expected true or false");
    return v->get<bool>();
  }

  long long integer(const std::string& key, long long def, long long lo, long long hi) {
    const auto* v = find(key);
    return v ? integer_value(*v, at(key), lo, hi) : def;
  }

  double number(const std::string& key, double def) {
    const auto* v = find(key);
    return v ? number_value(*v, at(key)) : def;
  }

  std::optional<double> optional_number(const std::string& key) {
    const auto* v = find(key);
    if (!v) return std::nullopt;
    return number_value(*v, at(key));
  }

  std::string string(const std::string& key, const std::string& def, std::initializer_list<const char*> allowed = {}) {
    const auto* v = find(key);
    if (!v) return def;
    if (!v->is_string()) throw ConfigError(at(key), "expected a string");
    std::string s = v->get<std::string>();
    if (allowed.size() == 0) return s;
    std::string list;
    for (const char* a : allowed) {
      if (s == a) return s;
      list += std::string(list.empty() ? "" : ", ") + a;
    }
    throw ConfigError(at(key), "expected one of " + list + "; got '" + s + "'");
  }

  void finish() const {
    for (const auto& [k, unused] : j_.items()) {
      (void)unused;
      if (!seen_.count(k)) throw ConfigError(at(k), "unknown field");
    }
  }

  static long long integer_value(const nlohmann::json& v, const std::string& ptr, long long lo, long long hi) {
    if (!v.is_number_integer()) throw ConfigError(ptr, "expected an integer");
    const auto x = v.get<long long>();
    if (x < lo || x > hi)
      throw ConfigError(ptr, "value " + std::to_string(x) + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return x;
  }

  static double number_value(const nlohmann::json& v, const std::string& ptr) {
    if (!v.is_number()) throw ConfigError(ptr, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(ptr, "expected a finite number");
    return x;
  }

 private:
  const nlohmann::json& j_;
  std::string ptr_;
  std::set<std::string> seen_;
};

inline void require_positive(double v, const std::string& ptr) {
  if (!(v > 0.0)) throw ConfigError(ptr, "must be positive");
}

}  // namespace detail

/// Parses and validates an experiment configuration. Errors are ConfigError
/// with a JSON pointer to the offending value.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using detail::ObjectReader;
  ExperimentConfig c;
  ObjectReader root(j, "");
  c.name = root.string("name", c.name);
  if (c.name.empty() || c.name.find('/') != std::string::npos) throw ConfigError("/name", "must be a non-empty file-name-safe string");
  c.measure = measure_spec_from_json(root.require("measure"), "/measure");

  {
    ObjectReader maps(root.require("maps"), "/maps");
    c.m = static_cast<unsigned>(ObjectReader::integer_value(maps.require("m"), "/maps/m", 2, 1 << 16));
    c.n = static_cast<unsigned>(ObjectReader::integer_value(maps.require("n"), "/maps/n", 2, 1 << 16));
    maps.finish();
  }

  if (const auto* o = root.find("orbit")) {
    ObjectReader r(*o, "/orbit");
    if (const auto* ns = r.find("N")) {
      if (!ns->is_array() || ns->empty()) throw ConfigError("/orbit/N", "expected a non-empty array of lengths");
      c.orbit.Ns.clear();
      for (std::size_t i = 0; i < ns->size(); ++i) {
        const std::string p = "/orbit/N/" + std::to_string(i);
        const auto v = static_cast<std::size_t>(ObjectReader::integer_value((*ns)[i], p, 1, 10000000));
        if (!c.orbit.Ns.empty() && v <= c.orbit.Ns.back()) throw ConfigError(p, "lengths must be strictly increasing");
        c.orbit.Ns.push_back(v);
      }
    }
    c.orbit.M = static_cast<std::size_t>(r.integer("M", static_cast<long long>(c.orbit.M), 1, 100000));
    c.orbit.precision_bits = static_cast<int>(r.integer("precision_bits", c.orbit.precision_bits, 8, 4096));
    c.orbit.dump = static_cast<std::size_t>(r.integer("dump", static_cast<long long>(c.orbit.dump), 0, 1000));
    r.finish();
  }

  const nlohmann::json empty = nlohmann::json::object();
  const auto* an = root.find("analyses");
  ObjectReader analyses(an ? *an : empty, "/analyses");

  if (const auto* e = analyses.find("equidist")) {
    ObjectReader r(*e, "/analyses/equidist");
    auto& q = c.equidist;
    q.enabled = r.boolean("enabled", true);
    q.K = static_cast<int>(r.integer("K", q.K, 1, 256));
    const std::string t = r.string("target", "auto", {"auto", "lambda_lambda", "lambda_times_marginal"});
    q.target = t == "lambda_lambda" ? TargetKind::LambdaLambda
               : t == "lambda_times_marginal" ? TargetKind::LambdaTimesMarginal
                                              : TargetKind::Auto;
    q.tol = r.optional_number("tol");
    if (q.tol) detail::require_positive(*q.tol, r.at("tol"));
    q.expect_generic = r.string("expect", "generic", {"generic", "non_generic"}) == "generic";
    q.min_deviation = r.number("min_deviation", q.min_deviation);
    detail::require_positive(q.min_deviation, r.at("min_deviation"));
    q.require_decreasing = r.boolean("require_decreasing", q.require_decreasing);
    r.finish();
  }

  if (const auto* d = analyses.find("dimension")) {
    ObjectReader r(*d, "/analyses/dimension");
    auto& q = c.dimension;
    q.enabled = r.boolean("enabled", true);
    q.samples = static_cast<std::size_t>(r.integer("samples", static_cast<long long>(q.samples), 100, 100000000));
    q.depth = static_cast<std::size_t>(r.integer("depth", static_cast<long long>(q.depth), 1, 4096));
    if (const auto* a = r.find("angles")) {
      if (!a->is_array()) throw ConfigError(r.at("angles"), "expected an array of degrees");
      q.angles.clear();
      for (std::size_t i = 0; i < a->size(); ++i) {
        const std::string p = r.at("angles") + "/" + std::to_string(i);
        const double v = ObjectReader::number_value((*a)[i], p);
        if (!(v > 0.0 && v < 180.0) || v == 90.0) throw ConfigError(p, "angle must lie in (0, 180) and differ from 90");
        q.angles.push_back(v);
      }
    }
    if (const auto* b = r.find("bounds")) {
      ObjectReader br(*b, r.at("bounds"));
      for (const auto& [key, val] : b->items()) {
        const std::string p = br.at(key);
        if (key != "mu") {
          try {
            projection_from_key(key);
          } catch (const std::exception& ex) {
            throw ConfigError(p, ex.what());
          }
        }
        if (!val.is_array() || val.size() != 2) throw ConfigError(p, "expected [lo, hi]");
        const double lo = ObjectReader::number_value(val[0], p + "/0"), hi = ObjectReader::number_value(val[1], p + "/1");
        if (lo > hi) throw ConfigError(p, "lo exceeds hi");
        q.bounds[key] = {lo, hi};
        br.find(key);
      }
      br.finish();
    }
    if (const auto* f = r.find("expect_flagged")) {
      if (!f->is_array()) throw ConfigError(r.at("expect_flagged"), "expected an array of degrees");
      q.expect_flagged.emplace();
      for (std::size_t i = 0; i < f->size(); ++i)
        q.expect_flagged->push_back(ObjectReader::number_value((*f)[i], r.at("expect_flagged") + "/" + std::to_string(i)));
    }
    r.finish();
  } else {
    c.dimension.enabled = false;
  }

  if (const auto* d = analyses.find("conservation")) {
    ObjectReader r(*d, "/analyses/conservation");
    auto& q = c.conservation;
    q.enabled = r.boolean("enabled", true);
    q.projection = r.string("projection", q.projection);
    try {
      projection_from_key(q.projection);
    } catch (const std::exception& ex) {
      throw ConfigError(r.at("projection"), ex.what());
    }
    q.max_residual = r.number("max_residual", q.max_residual);
    detail::require_positive(q.max_residual, r.at("max_residual"));
    q.samples = static_cast<std::size_t>(r.integer("samples", static_cast<long long>(q.samples), 100, 100000000));
    q.depth = static_cast<std::size_t>(r.integer("depth", static_cast<long long>(q.depth), 1, 4096));
    r.finish();
  }

  if (const auto* s = analyses.find("scenery")) {
    ObjectReader r(*s, "/analyses/scenery");
    auto& q = c.scenery;
    q.enabled = r.boolean("enabled", true);
    q.dt = r.optional_number("dt");
    if (q.dt) detail::require_positive(*q.dt, r.at("dt"));
    q.J = static_cast<std::size_t>(r.integer("J", static_cast<long long>(q.J), 32, 100000));
    q.anchors = static_cast<std::size_t>(r.integer("anchors", static_cast<long long>(q.anchors), 1, 1000));
    q.samples_per_level =
        static_cast<std::size_t>(r.integer("samples_per_level", static_cast<long long>(q.samples_per_level), 100, 10000000));
    const auto read_names = [&](const std::string& key, std::vector<std::string>& out) {
      const auto* a = r.find(key);
      if (!a) return;
      if (!a->is_array()) throw ConfigError(r.at(key), "expected an array of observable names");
      out.clear();
      for (std::size_t i = 0; i < a->size(); ++i) {
        const std::string p = r.at(key) + "/" + std::to_string(i);
        if (!(*a)[i].is_string()) throw ConfigError(p, "expected a string");
        try {
          observable_from_string((*a)[i].get<std::string>());
        } catch (const std::exception& ex) {
          throw ConfigError(p, ex.what());
        }
        out.push_back((*a)[i].get<std::string>());
      }
    };
    read_names("observables", q.observables);
    read_names("require", q.require);
    for (std::size_t i = 0; i < q.require.size(); ++i)
      if (std::find(q.observables.begin(), q.observables.end(), q.require[i]) == q.observables.end())
        throw ConfigError(r.at("require") + "/" + std::to_string(i), "required observable is not listed in observables");
    q.expected_frequency = r.optional_number("expected_frequency");
    if (q.expected_frequency) detail::require_positive(*q.expected_frequency, r.at("expected_frequency"));
    q.expected_inverse_log = r.optional_number("expected_inverse_log");
    if (q.expected_inverse_log && !(*q.expected_inverse_log > 1.0))
      throw ConfigError(r.at("expected_inverse_log"), "must exceed 1");
    if (q.expected_frequency && q.expected_inverse_log)
      throw ConfigError(r.at("expected_inverse_log"), "give expected_frequency or expected_inverse_log, not both");
    q.tolerance_bins = r.number("tolerance_bins", q.tolerance_bins);
    detail::require_positive(q.tolerance_bins, r.at("tolerance_bins"));
    r.finish();
  }

  if (const auto* k = analyses.find("checks")) {
    ObjectReader r(*k, "/analyses/checks");
    auto& q = c.checks;
    q.enabled = r.boolean("enabled", true);
    q.spectral_bound = static_cast<long>(r.integer("spectral_bound", q.spectral_bound, 1, 100000000));
    q.spectral_bits = static_cast<long>(r.integer("spectral_bits", q.spectral_bits, 64, 65536));
    q.search_projections = r.boolean("search_projections", q.search_projections);
    q.samples = static_cast<std::size_t>(r.integer("samples", static_cast<long long>(q.samples), 100, 100000000));
    q.depth = static_cast<std::size_t>(r.integer("depth", static_cast<long long>(q.depth), 1, 4096));
    r.finish();
  }
  analyses.finish();

  c.seed = static_cast<std::uint64_t>(root.integer("seed", 1, 0, std::numeric_limits<long long>::max()));
  c.output_dir = root.string("output_dir", "out/" + c.name);
  c.svg = root.boolean("svg", true);
  root.finish();
  return c;
}

/// Fully resolved configuration; parsing it again yields the same config.
inline nlohmann::json to_json(const ExperimentConfig& c) {
  using nlohmann::json;
  const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json bounds = json::object();
  for (const auto& [k, v] : c.dimension.bounds) bounds[k] = {v[0], v[1]};
  json dim{{"enabled", c.dimension.enabled},
           {"samples", c.dimension.samples},
           {"depth", c.dimension.depth},
           {"angles", c.dimension.angles},
           {"bounds", bounds},
           {"expect_flagged", c.dimension.expect_flagged ? json(*c.dimension.expect_flagged) : json(nullptr)}};
  return {{"name", c.name},
          {"measure", to_json(c.measure)},
          {"maps", {{"m", c.m}, {"n", c.n}}},
          {"orbit", {{"N", c.orbit.Ns}, {"M", c.orbit.M}, {"precision_bits", c.orbit.precision_bits}, {"dump", c.orbit.dump}}},
          {"analyses",
           {{"equidist",
             {{"enabled", c.equidist.enabled},
              {"K", c.equidist.K},
              {"target", to_string(c.equidist.target)},
              {"tol", opt(c.equidist.tol)},
              {"expect", c.equidist.expect_generic ? "generic" : "non_generic"},
              {"min_deviation", c.equidist.min_deviation},
              {"require_decreasing", c.equidist.require_decreasing}}},
            {"dimension", dim},
            {"conservation",
             {{"enabled", c.conservation.enabled},
              {"projection", c.conservation.projection},
              {"max_residual", c.conservation.max_residual},
              {"samples", c.conservation.samples},
              {"depth", c.conservation.depth}}},
            {"scenery",
             {{"enabled", c.scenery.enabled},
              {"dt", opt(c.scenery.dt)},
              {"J", c.scenery.J},
              {"anchors", c.scenery.anchors},
              {"samples_per_level", c.scenery.samples_per_level},
              {"observables", c.scenery.observables},
              {"require", c.scenery.require},
              {"expected_frequency", opt(c.scenery.expected_frequency)},
              {"expected_inverse_log", opt(c.scenery.expected_inverse_log)},
              {"tolerance_bins", c.scenery.tolerance_bins}}},
            {"checks",
             {{"enabled", c.checks.enabled},
              {"spectral_bound", c.checks.spectral_bound},
              {"spectral_bits", c.checks.spectral_bits},
              {"search_projections", c.checks.search_projections},
              {"samples", c.checks.samples},
              {"depth", c.checks.depth}}}}},
          {"seed", c.seed},
          {"output_dir", c.output_dir},
          {"svg", c.svg}};
}

/// Reads and parses a JSON file; unreadable or malformed input is a ConfigError
/// at the document root.
inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("", "cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("", path + ": " + e.what());
  }
}

inline ExperimentConfig load_config(const std::string& path) { return config_from_json(read_json_file(path)); }

}  // namespace torus_equidist
