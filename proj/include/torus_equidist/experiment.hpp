#pragma once

// Experiment pipelines: hypothesis checks, typical orbits, statistics and
// artifact emission, plus the built-in demo configurations.

#include <cctype>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "dynamics.hpp"
#include "equidist.hpp"
#include "geometry.hpp"
#include "ifs.hpp"
#include "independence.hpp"
#include "io.hpp"
#include "measures.hpp"
#include "scenery.hpp"

namespace torus_equidist {

enum ExitCode : int { kExitPass = 0, kExitFail = 1, kExitConfig = 2, kExitPrecision = 3 };

/// Raised when an orbit cannot be certified even after the precision retry.
class PrecisionFailure : public std::runtime_error {
 public:
  explicit PrecisionFailure(const std::string& msg) : std::runtime_error(msg) {}
};

// ---------------------------------------------------------------------------
// Hypothesis checks
// ---------------------------------------------------------------------------

struct Hypothesis {
  std::string condition;
  std::string verdict;
  bool exact = true;
  bool holds = false;
  bool required = true;
  nlohmann::json detail = nlohmann::json::object();
};

struct CheckBundle {
  std::string theorem;  // which result the hypotheses belong to
  std::vector<Hypothesis> hypotheses;

  bool all_required_hold() const {
    for (const auto& h : hypotheses)
      if (h.required && !h.holds) return false;
    return true;
  }
  std::vector<std::string> failed() const {
    std::vector<std::string> out;
    for (const auto& h : hypotheses)
      if (h.required && !h.holds) out.push_back(h.condition);
    return out;
  }
};

inline nlohmann::json to_json(const Hypothesis& h) {
  nlohmann::json j{{"condition", h.condition}, {"verdict", h.verdict}, {"exact", h.exact},
                   {"holds", h.holds},         {"required", h.required}};
  for (const auto& [k, v] : h.detail.items()) j[k] = v;
  return j;
}

inline nlohmann::json to_json(const CheckBundle& b) {
  nlohmann::json hs = nlohmann::json::array();
  for (const auto& h : b.hypotheses) hs.push_back(to_json(h));
  return {{"theorem", b.theorem}, {"hypotheses", hs}, {"all_required_hold", b.all_required_hold()}, {"failed", b.failed()}};
}

namespace detail {

inline Hypothesis exact_comparison(const std::string& condition, bool holds) {
  return {condition, holds ? "True" : "False", true, holds, true, nlohmann::json::object()};
}

inline Hypothesis independence_hypothesis(const std::string& condition, const IndependenceVerdict& v) {
  Hypothesis h{condition, to_string(v.kind), v.kind != Dependence::Undecidable, v.independent(), true, nlohmann::json::object()};
  if (v.kind == Dependence::Dependent) h.detail["witness"] = {{"a", v.a}, {"b", v.b}};
  if (!v.note.empty()) h.detail["note"] = v.note;
  return h;
}

/// n relative to the y digit base: n = p (invariant direction) or n independent of p.
inline std::vector<Hypothesis> second_map_hypotheses(unsigned m, unsigned n, unsigned p) {
  if (n == p) {
    Hypothesis h{"n = p", "Equal", true, true, true, nlohmann::json::object()};
    h.detail["note"] = "T_n preserves the y-marginal; target lambda x P2 mu";
    return {h};
  }
  return {independence_hypothesis("n ≁ p", mult_indep_int(n, p)), exact_comparison("m > n > p", m > n && n > p)};
}

inline Hypothesis search_hypothesis(const ProjectionSearch& s, bool required) {
  std::vector<double> flagged;
  for (const auto& a : s.angles)
    if (a.flagged) flagged.push_back(a.degrees);
  Hypothesis h{"non-principal projection drops dimension", s.any_flagged() ? "Flagged" : "NotFlagged", false,
               s.any_flagged(), required, nlohmann::json::object()};
  h.detail["flagged_degrees"] = flagged;
  h.detail["search"] = to_json(s);
  return h;
}

inline bool single_row_or_column(const std::vector<std::vector<BigRational>>& w) {
  std::set<std::size_t> rows, cols;
  for (std::size_t i = 0; i < w.size(); ++i)
    for (std::size_t j = 0; j < w[i].size(); ++j)
      if (w[i][j] > BigRational(0)) {
        rows.insert(i);
        cols.insert(j);
      }
  return rows.size() <= 1 || cols.size() <= 1;
}

}  // namespace detail

/// Machine-readable hypothesis bundle for running `spec` under T_m x T_n.
/// Exact checkers decide what they can; the projection search is numerical.
inline CheckBundle check(const MeasureSpec& spec, unsigned m, unsigned n, const ChecksConfig& cc = {},
                         std::uint64_t seed = 1) {
  validate(spec);
  if (m < 2 || n < 2) throw std::invalid_argument("check: m and n must be >= 2");
  CheckBundle b;
  const auto search = [&](bool required) {
    const EmpiricalMeasure2D cloud = sample_cloud(spec, cc.samples, cc.depth, derive_seed(seed, 500));
    return detail::search_hypothesis(condition_1_1_search(cloud, default_angle_grid()), required);
  };
  const auto sufficient = [](const std::string& why) {
    Hypothesis h{"non-principal projection drops dimension", "Holds", true, true, true, nlohmann::json::object()};
    h.detail["reason"] = why;
    return h;
  };

  if (const auto* s = std::get_if<Bernoulli1D>(&spec)) {
    b.theorem = "circle: T_m orbits of a T_p-invariant digit measure";
    b.hypotheses.push_back(detail::independence_hypothesis("m ≁ p", mult_indep_int(m, s->base)));
    return b;
  }

  if (const auto* s = std::get_if<PlanarIFS>(&spec)) {
    b.theorem = "self-similar: T_m x T_n orbits of a self-similar measure with rotations";
    const IFSAnalysis an = analyze_rotations(*s, false);
    const SSCResult ssc = validate_ssc(*s);
    b.hypotheses.push_back(detail::exact_comparison("m > n > 1", m > n && n > 1));
    Hypothesis ur{"uniform contraction ratio", an.uniform_ratio ? "Uniform" : "NonUniform", true, an.uniform_ratio.has_value(),
                  true, nlohmann::json::object()};
    if (an.uniform_ratio) ur.detail["r"] = an.uniform_ratio->to_string();
    b.hypotheses.push_back(ur);
    if (an.uniform_ratio) {
      b.hypotheses.push_back(detail::independence_hypothesis("m ≁ r", mult_indep_ratio(*an.uniform_ratio, m)));
      b.hypotheses.push_back(detail::independence_hypothesis("n ≁ r", mult_indep_ratio(*an.uniform_ratio, n)));
    }
    Hypothesis sh{"SSC", to_string(ssc.verdict), ssc.verdict != SSCVerdict::Unknown, ssc.verdict == SSCVerdict::Certified, true,
                  nlohmann::json::object()};
    sh.detail["depth"] = ssc.depth;
    if (!ssc.detail.empty()) sh.detail["note"] = ssc.detail;
    b.hypotheses.push_back(sh);
    {
      // numerical: spread of a sample in both coordinates
      const EmpiricalMeasure2D cloud = sample_cloud(spec, 4096, 30, derive_seed(seed, 501));
      double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
      for (const auto& p : cloud.points()) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
      }
      const bool spread = x1 - x0 > 1e-9 && y1 - y0 > 1e-9;
      Hypothesis h{"support not on an axis-parallel line", spread ? "True" : "False", false, spread, true, nlohmann::json::object()};
      h.detail["extent"] = {x1 - x0, y1 - y0};
      b.hypotheses.push_back(h);
    }
    Hypothesis so{"G_Phi <= SO(2)", "True", true, true, true, nlohmann::json::object()};
    so.detail["note"] = "branches are rotations by construction";
    b.hypotheses.push_back(so);
    {
      const double dim = entropy_dimension(spec);
      const bool holds = (an.decided && an.group_finite) || (ssc.verdict == SSCVerdict::Certified && dim > 1.0);
      Hypothesis h{"|G_Phi| finite or dim mu > 1", holds ? "True" : (an.decided ? "False" : "Unknown"), an.decided, holds, true,
                   nlohmann::json::object()};
      h.detail["rotations"] = to_json(an);
      h.detail["dim_mu"] = dim;
      b.hypotheses.push_back(h);
    }
    for (auto [label, q] : {std::pair{"spectral condition (m)", m}, std::pair{"spectral condition (n)", n}}) {
      const SpectralVerdict v = spectral_condition(an, q, cc.spectral_bound, cc.spectral_bits);
      const bool holds = v.kind == SpectralKind::Satisfied || v.kind == SpectralKind::SatisfiedUpTo || v.kind == SpectralKind::Vacuous;
      Hypothesis h{label, to_string(v.kind), v.kind == SpectralKind::Satisfied || v.kind == SpectralKind::Vacuous, holds, true,
                   nlohmann::json::object()};
      const nlohmann::json vj = to_json(v, label);
      for (const char* k : {"bound", "precision", "witness", "note"})
        if (vj.contains(k)) h.detail[k] = vj[k];
      b.hypotheses.push_back(h);
    }
    return b;
  }

  if (const auto* s = std::get_if<MixedBaseBernoulli>(&spec)) {
    b.theorem = "invariant: T_m x T_n orbits of a T_p x T_p-invariant measure";
    b.hypotheses.push_back(detail::exact_comparison("T_p x T_p invariant (equal digit bases)", s->base_x == s->base_y));
    b.hypotheses.push_back(detail::independence_hypothesis("m ≁ p", mult_indep_int(m, s->base_x)));
    for (auto& h : detail::second_map_hypotheses(m, n, s->base_y)) b.hypotheses.push_back(h);
    if (cc.search_projections) b.hypotheses.push_back(search(true));
    return b;
  }

  // ProductBernoulli or LineEmbedding: T_p x T_p-invariant digit measures
  b.theorem = "invariant: T_m x T_n orbits of a T_p x T_p-invariant measure";
  unsigned p = 0;
  std::optional<Hypothesis> sufficient_11;
  if (const auto* s = std::get_if<ProductBernoulli>(&spec)) {
    p = s->base;
    if (entropy_dimension(spec) > 1.0) sufficient_11 = sufficient("dim mu > 1");
    else if (!detail::single_row_or_column(s->weights))
      sufficient_11 = sufficient("i.i.d. non-degenerate digit pairs, support not on an axis-parallel line");
  } else {
    const auto& l = std::get<LineEmbedding>(spec);
    p = l.digits.base;
    if (!(l.slope == BigRational(1) && l.intercept == BigRational(0))) {
      Hypothesis h = detail::exact_comparison("T_p x T_p invariant (diagonal embedding)", false);
      h.detail["note"] = "affine embeddings other than the diagonal are not T_p x T_p invariant";
      b.hypotheses.push_back(h);
    }
    if (entropy_dimension(spec) > 0.0) sufficient_11 = sufficient("dim mu > 0 on a line not parallel to the axes");
  }
  b.hypotheses.push_back(detail::exact_comparison("m > p", m > p));
  b.hypotheses.push_back(detail::independence_hypothesis("m ≁ p", mult_indep_int(m, p)));
  for (auto& h : detail::second_map_hypotheses(m, n, p)) b.hypotheses.push_back(h);
  if (sufficient_11) {
    if (cc.search_projections) {
      Hypothesis num = search(false);
      sufficient_11->detail["numerical"] = {{"verdict", num.verdict}, {"flagged_degrees", num.detail["flagged_degrees"]}};
    }
    b.hypotheses.push_back(*sufficient_11);
  } else if (cc.search_projections) {
    b.hypotheses.push_back(search(true));
  } else {
    b.hypotheses.push_back({"non-principal projection drops dimension", "Unchecked", false, false, true,
                            nlohmann::json::object()});
  }
  return b;
}

// ---------------------------------------------------------------------------
// Typical orbits
// ---------------------------------------------------------------------------

/// Coding depth at which a sampled point determines N + g digits of both
/// coordinates in bases (m, n). IFS points additionally get `extra_bits` of
/// headroom below the orbit_ball radius contract.
inline std::size_t orbit_depth(const MeasureSpec& spec, const OrbitSpec& os, double extra_bits = 40.0) {
  const double digits = static_cast<double>(required_digits(os));
  const double lm = std::log(static_cast<double>(os.m)), ln = std::log(static_cast<double>(os.n));
  const auto need = [&](double log_target, double log_base, double slack) {
    return static_cast<std::size_t>(std::ceil((digits * log_target + slack) / log_base)) + 2;
  };
  return std::visit(
      [&](const auto& s) -> std::size_t {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Bernoulli1D>) {
          return need(lm, std::log(static_cast<double>(s.base)), 0.0);
        } else if constexpr (std::is_same_v<T, ProductBernoulli>) {
          return need(std::max(lm, ln), std::log(static_cast<double>(s.base)), 0.0);
        } else if constexpr (std::is_same_v<T, MixedBaseBernoulli>) {
          return std::max(need(lm, std::log(static_cast<double>(s.base_x)), 0.0),
                          need(ln, std::log(static_cast<double>(s.base_y)), 0.0));
        } else if constexpr (std::is_same_v<T, LineEmbedding>) {
          const double slope = std::max(1.0, std::fabs(s.slope.to_double()));
          return need(std::max(lm, ln), std::log(static_cast<double>(s.digits.base)), std::log(slope));
        } else {
          double r_max = 0.0;
          for (const auto& br : s.branches) r_max = std::max(r_max, br.ratio.to_double());
          const double R = bounding_ball(s).radius;
          return need(std::max(lm, ln), -std::log(r_max), extra_bits * std::log(2.0) + std::log(1.0 + R));
        }
      },
      spec);
}

/// Working precision for IFS sampling at `depth`.
inline long ifs_working_bits(const PlanarIFS& ifs, std::size_t depth) {
  double r_min = 1.0;
  for (const auto& br : ifs.branches) r_min = std::min(r_min, br.ratio.to_double());
  return static_cast<long>(std::ceil(static_cast<double>(depth) * std::log2(1.0 / r_min))) + 64;
}

/// Orbit of one sampled point. `scale` multiplies the precision budget.
inline Certified<Orbit> typical_orbit(const MeasureSpec& spec, const OrbitSpec& os, std::uint64_t seed, int scale = 1) {
  const std::size_t depth = orbit_depth(spec, os, 40.0 * scale);
  long bits = 0;
  if (const auto* ifs = std::get_if<PlanarIFS>(&spec)) bits = ifs_working_bits(*ifs, depth) * scale;
  const MeasureSample s = sample(spec, depth, seed, bits);
  return orbit_ball(s.point, os);
}

struct OrbitBatch {
  std::vector<Orbit> orbits;
  std::vector<std::size_t> retried;  // indices that needed the 2x precision retry
};

/// M typical orbits; orbit i starts from a point drawn with stream 200 + i.
/// Uncertifiable orbits are retried once at twice the precision budget;
/// PrecisionFailure if any still fails.
inline OrbitBatch typical_orbits(const MeasureSpec& spec, const OrbitSpec& os, std::size_t M, std::uint64_t seed) {
  os.validate();
  std::vector<Certified<Orbit>> res(M, InsufficientPrecision{});
  parallel_for(M, [&](std::size_t i) { res[i] = typical_orbit(spec, os, derive_seed(seed, 200 + i)); });
  OrbitBatch out;
  for (std::size_t i = 0; i < M; ++i)
    if (!is_certified(res[i])) out.retried.push_back(i);
  parallel_for(out.retried.size(), [&](std::size_t k) {
    const std::size_t i = out.retried[k];
    res[i] = typical_orbit(spec, os, derive_seed(seed, 200 + i), 2);
  });
  for (std::size_t i = 0; i < M; ++i) {
    if (auto* err = std::get_if<InsufficientPrecision>(&res[i]))
      throw PrecisionFailure("orbit " + std::to_string(i) + " not certified after retry at 2x precision: " + err->detail);
    out.orbits.push_back(std::move(std::get<Orbit>(res[i])));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Analyses
// ---------------------------------------------------------------------------

inline TargetKind resolve_target(const ExperimentConfig& c) {
  if (c.equidist.target != TargetKind::Auto) return c.equidist.target;
  if (std::holds_alternative<Bernoulli1D>(c.measure)) return TargetKind::LambdaTimesMarginal;
  try {
    if (marginal(c.measure, Axis::Y).base == c.n) return TargetKind::LambdaTimesMarginal;
  } catch (const std::invalid_argument&) {
  }
  return TargetKind::LambdaLambda;
}

inline Target make_target(const ExperimentConfig& c, TargetKind kind) {
  if (kind == TargetKind::LambdaLambda) return LambdaLambda{};
  try {
    return LambdaTimes{marginal(c.measure, Axis::Y), 1e-8};
  } catch (const std::invalid_argument& e) {
    throw ConfigError("/analyses/equidist/target", e.what());
  }
}

/// Frequency `f` expected in the scenery periodogram, if any.
inline std::optional<double> expected_frequency(const SceneryConfig& s) {
  if (s.expected_frequency) return s.expected_frequency;
  if (s.expected_inverse_log) return 1.0 / std::log(*s.expected_inverse_log);
  return std::nullopt;
}

/// Default scenery step: |log r_max| / 8.
inline double default_scenery_dt(const MeasureSpec& spec) {
  const Coding coding(spec);
  double r_max = 0.0;
  for (std::uint32_t s = 0; s < coding.symbols(); ++s)
    if (coding.probabilities()[s] > 0.0) r_max = std::max(r_max, coding.contraction(s));
  return -std::log(r_max) / 8.0;
}

struct RunResult {
  int exit_code = kExitPass;
  nlohmann::json report;
  std::filesystem::path output_dir;
};

namespace detail {

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string key_file_name(const std::string& key) {
  std::string out;
  for (char c : key) out += (std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return out;
}

class Artifacts {
 public:
  explicit Artifacts(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void text(const std::string& name, const std::string& contents) {
    atomic_write(dir_ / name, contents);
    files_.push_back(name);
  }

  template <class Writer>
  void stream(const std::string& name, Writer&& w) {
    atomic_write_with(dir_ / name, std::forward<Writer>(w));
    files_.push_back(name);
  }

  const std::vector<std::string>& files() const { return files_; }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> files_;
};

inline nlohmann::json run_equidist(const ExperimentConfig& c, const CheckBundle* checks, Artifacts& out, std::ostream* log,
                                   bool& pass) {
  const auto& q = c.equidist;
  const TargetKind kind = resolve_target(c);
  const Target target = make_target(c, kind);
  const OrbitSpec os{c.m, c.n, c.orbit.length(), c.orbit.precision_bits};
  if (log) *log << "equidist: " << c.orbit.M << " orbits of length " << os.length << " under T" << c.m << " x T" << c.n << "\n";
  const OrbitBatch batch = typical_orbits(c.measure, os, c.orbit.M, c.seed);

  std::vector<std::vector<Point2>> pts;
  double certified = 0.0;
  for (const auto& o : batch.orbits) {
    pts.push_back(o.points);
    certified = std::max(certified, o.certified_error);
  }
  std::vector<CoeffTable> averaged;
  auto tr = trend(pts, c.orbit.Ns, q.K, target, &averaged);
  const double tol = q.tol.value_or(default_tolerance(os.length, c.orbit.M));
  EquidistReport rep = compare_tables(averaged.back(), target_table(target, q.K), tol);
  annotate_trend(rep, tr, c.orbit.M);

  bool ok;
  nlohmann::json criterion;
  if (q.expect_generic) {
    ok = rep.pass && (!q.require_decreasing || rep.trend_decreasing);
    criterion = {{"expect", "generic"}, {"max_deviation_at_most", tol}, {"require_decreasing", q.require_decreasing}};
  } else {
    ok = rep.max_deviation >= q.min_deviation;
    criterion = {{"expect", "non_generic"}, {"max_deviation_at_least", q.min_deviation}};
  }
  pass = pass && ok;

  const std::string hash = spec_hash(c.measure);
  for (std::size_t i = 0; i < std::min(c.orbit.dump, batch.orbits.size()); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "orbit_%03zu", i);
    out.stream(std::string(stem) + ".csv", [&](std::ostream& os_) { write_orbit_csv(os_, batch.orbits[i]); });
    nlohmann::json side = orbit_sidecar(os, batch.orbits[i], derive_seed(c.seed, 200 + i), hash);
    side["run_seed"] = c.seed;
    side["stream"] = 200 + i;
    out.text(std::string(stem) + ".json", side.dump(2) + "\n");
  }
  out.stream("coefficients.csv", [&](std::ostream& s) { write_coeff_csv(s, rep); });
  out.stream("trend.csv", [&](std::ostream& s) {
    s << "N,max_deviation\n";
    for (const auto& t : rep.trend) s << t.N << ',' << format_double(t.max_deviation) << '\n';
  });
  if (c.svg) {
    out.text("deviation_heatmap.svg", svg::deviation_heatmap(rep));
    out.text("trend.svg", svg::trend_plot(rep));
  }

  nlohmann::json j = to_json(rep);
  j.erase("metadata");
  j["target"] = target_name(target);
  j["target_kind"] = to_string(kind);
  j["maps"] = {{"m", c.m}, {"n", c.n}};
  j["N"] = os.length;
  j["M"] = c.orbit.M;
  j["certified_orbit_error"] = certified;
  j["precision_retries"] = batch.retried;
  j["criterion"] = criterion;
  j["tolerance"] = q.expect_generic ? tol : q.min_deviation;
  std::vector<std::string> depends;
  if (checks)
    for (const auto& h : checks->hypotheses) depends.push_back(h.condition);
  j["depends_on"] = depends;
  j["pass"] = ok;
  return j;
}

inline bool within(double v, const std::array<double, 2>& b) { return v >= b[0] && v <= b[1]; }

inline nlohmann::json run_dimension(const ExperimentConfig& c, Artifacts& out, std::ostream* log, bool& pass) {
  const auto& q = c.dimension;
  if (log) *log << "dimension: " << q.samples << " samples at depth " << q.depth << "\n";
  const EmpiricalMeasure2D cloud = sample_cloud(c.measure, q.samples, q.depth, derive_seed(c.seed, 300));
  const DimensionReport mu = estimate_dimension(cloud);
  nlohmann::json j{{"samples", q.samples}, {"depth", q.depth}, {"dim_mu", to_json(mu)},
                   {"closed_form_dim_mu", entropy_dimension(c.measure)}};
  out.stream("dimension_mu.csv", [&](std::ostream& s) { write_dimension_csv(s, mu); });
  if (c.svg) out.text("dimension_mu.svg", svg::dimension_plot(mu, "mu"));

  bool ok = true;
  nlohmann::json bounds = nlohmann::json::object();
  for (const auto& [key, b] : q.bounds) {
    DimensionReport r = mu;
    if (key != "mu") {
      r = estimate_dimension(project(cloud, projection_from_key(key)));
      const std::string stem = "dimension_" + key_file_name(key);
      out.stream(stem + ".csv", [&](std::ostream& s) { write_dimension_csv(s, r); });
      if (c.svg) out.text(stem + ".svg", svg::dimension_plot(r, key));
    }
    const bool in = within(r.fitted_dim, b);
    ok = ok && in;
    bounds[key] = {{"estimate", r.fitted_dim}, {"half_width", r.half_width}, {"bounds", {b[0], b[1]}}, {"within", in}};
  }
  j["bounds"] = bounds;

  if (!q.angles.empty()) {
    const ProjectionSearch s = condition_1_1_search(cloud, q.angles);
    j["projection_search"] = to_json(s);
    std::vector<double> flagged;
    for (const auto& a : s.angles)
      if (a.flagged) flagged.push_back(a.degrees);
    j["flagged_degrees"] = flagged;
    if (q.expect_flagged) {
      std::vector<double> want = *q.expect_flagged;
      std::sort(want.begin(), want.end());
      const bool match = want == flagged;
      j["expect_flagged"] = want;
      j["flagged_match"] = match;
      ok = ok && match;
    }
  }
  j["tolerance"] = "bounds are closed intervals on the fitted dimension; flags use the combined half-widths";
  j["pass"] = ok;
  pass = pass && ok;
  return j;
}

inline nlohmann::json run_conservation(const ExperimentConfig& c, std::ostream* log, bool& pass) {
  const auto& q = c.conservation;
  if (log) *log << "conservation: projection " << q.projection << "\n";
  ConservationParams par;
  par.samples = q.samples;
  par.depth = q.depth;
  par.seed = derive_seed(c.seed, 310);
  const ConservationReport r = conservation_report(c.measure, projection_from_key(q.projection), par);
  bool ok = true;
  for (const auto& w : r.widths) ok = ok && std::fabs(w.residual) <= q.max_residual;
  nlohmann::json j = to_json(r);
  j["projection"] = q.projection;
  j["tolerance"] = q.max_residual;
  j["pass"] = ok;
  pass = pass && ok;
  return j;
}

inline nlohmann::json run_scenery(const ExperimentConfig& c, Artifacts& out, std::ostream* log, bool& pass) {
  const auto& q = c.scenery;
  SceneryParams par;
  par.dt = q.dt.value_or(default_scenery_dt(c.measure));
  par.J = q.J;
  par.samples_per_level = q.samples_per_level;
  if (log) *log << "scenery: " << q.anchors << " anchors, dt " << par.dt << ", J " << par.J << "\n";
  std::vector<SceneryTrack> tracks(q.anchors);
  for (std::size_t a = 0; a < q.anchors; ++a) tracks[a] = scenery_track(c.measure, derive_seed(c.seed, 400 + a), par);
  const auto f = expected_frequency(q);
  const std::vector<std::string> required = q.require.empty() ? q.observables : q.require;

  nlohmann::json obs = nlohmann::json::object();
  bool ok = true;
  for (const auto& name : q.observables) {
    const Observable o = observable_from_string(name);
    std::vector<Periodogram> pgs;
    for (const auto& t : tracks) pgs.push_back(spectrum_estimate(t.observable(o), par.dt));
    const Periodogram pg = average_periodograms(pgs);
    nlohmann::json oj = to_json(pg);
    if (f) {
      const bool hit = dominant_peak_near(pg, *f, q.tolerance_bins);
      oj["dominant_near_expected"] = hit;
      const bool req = std::find(required.begin(), required.end(), name) != required.end();
      oj["required"] = req;
      if (req) ok = ok && hit;
    }
    obs[name] = oj;
    out.stream("periodogram_" + name + ".csv", [&](std::ostream& s) { write_periodogram_csv(s, pg); });
    out.stream("series_" + name + ".csv", [&](std::ostream& s) { write_series_csv(s, tracks.front(), o); });
    if (c.svg) {
      out.text("periodogram_" + name + ".svg", svg::periodogram_plot(pg, name, f ? std::vector<double>{*f} : std::vector<double>{}));
      out.text("series_" + name + ".svg", svg::series_plot(tracks.front(), o));
    }
  }
  std::vector<nlohmann::json> anchors;
  for (const auto& t : tracks)
    anchors.push_back({{"anchor", {t.anchor.x, t.anchor.y}}, {"frames", t.frames.size()}, {"truncated", t.truncated}});
  nlohmann::json j{{"dt", par.dt}, {"J", par.J}, {"anchors", anchors}, {"observables", obs}};
  j["expected_frequency"] = f ? nlohmann::json(*f) : nlohmann::json(nullptr);
  j["tolerance"] = {{"bins", q.tolerance_bins}};
  j["pass"] = ok;
  pass = pass && ok;
  return j;
}

}  // namespace detail

/// Runs every enabled analysis and writes the artifacts into the output
/// directory. Hypothesis failures downgrade the run to "exploratory"; they
/// never abort it. PrecisionFailure propagates (exit code 3 at the CLI).
inline RunResult run(const ExperimentConfig& c, std::ostream* log = nullptr) {
  RunResult res;
  res.output_dir = c.output_dir;
  detail::Artifacts out(res.output_dir);
  out.text("config.resolved.json", to_json(c).dump(2) + "\n");

  nlohmann::json rep{{"name", c.name},
                     {"timestamp", detail::utc_timestamp()},
                     {"seed", c.seed},
                     {"measure", {{"spec", to_json(c.measure)}, {"hash", spec_hash(c.measure)}, {"kind", kind_name(c.measure)}}},
                     {"maps", {{"m", c.m}, {"n", c.n}}}};

  std::optional<CheckBundle> checks;
  if (c.checks.enabled) {
    if (log) *log << "checks\n";
    checks = check(c.measure, c.m, c.n, c.checks, c.seed);
    rep["hypotheses"] = to_json(*checks);
  }
  rep["status"] = (checks && !checks->all_required_hold()) ? "exploratory" : (checks ? "confirmatory" : "unchecked");

  bool pass = true;
  nlohmann::json analyses = nlohmann::json::object();
  if (c.equidist.enabled) analyses["equidist"] = detail::run_equidist(c, checks ? &*checks : nullptr, out, log, pass);
  if (c.dimension.enabled) analyses["dimension"] = detail::run_dimension(c, out, log, pass);
  if (c.conservation.enabled) analyses["conservation"] = detail::run_conservation(c, log, pass);
  if (c.scenery.enabled) analyses["scenery"] = detail::run_scenery(c, out, log, pass);
  rep["analyses"] = analyses;
  rep["pass"] = pass;
  res.exit_code = pass ? kExitPass : kExitFail;
  rep["exit_code"] = res.exit_code;
  std::vector<std::string> files = out.files();
  files.push_back("report.json");
  rep["artifacts"] = files;
  out.text("report.json", rep.dump(2) + "\n");
  res.report = std::move(rep);
  return res;
}

// ---------------------------------------------------------------------------
// Demos
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& demo_names() {
  static const std::vector<std::string> names{"theorem-star", "theorem-inv-1", "theorem-inv-2",
                                              "theorem-ss",   "counterexample", "scenery-period"};
  return names;
}

/// Configuration of a built-in demo; configs/<name>.json holds the same.
inline nlohmann::json demo_config_json(const std::string& name) {
  using nlohmann::json;
  const json cantor{{"kind", "bernoulli"}, {"base", 3}, {"weights", {"1/2", "0", "1/2"}}};
  const json diagonal{{"kind", "line_embedding"}, {"digits", cantor}};
  const json off{{"enabled", false}};
  if (name == "theorem-star")
    return {{"name", name},
            {"measure", cantor},
            {"maps", {{"m", 2}, {"n", 2}}},
            {"orbit", {{"N", {1000, 10000, 100000}}, {"M", 50}}},
            {"analyses", {{"equidist", {{"K", 8}, {"target", "lambda_times_marginal"}, {"tol", 0.05}, {"require_decreasing", true}}}}},
            {"seed", 1}};
  if (name == "theorem-inv-1")
    return {{"name", name},
            {"measure", diagonal},
            {"maps", {{"m", 4}, {"n", 3}}},
            {"orbit", {{"N", {1000, 10000, 100000}}, {"M", 50}}},
            {"analyses",
             {{"equidist", {{"K", 8}, {"target", "lambda_times_marginal"}, {"tol", 0.05}, {"require_decreasing", false}}}}},
            {"seed", 1}};
  if (name == "theorem-inv-2")
    return {{"name", name},
            {"measure", diagonal},
            {"maps", {{"m", 5}, {"n", 4}}},
            {"orbit", {{"N", {1000, 10000, 100000}}, {"M", 50}}},
            {"analyses", {{"equidist", {{"K", 8}, {"target", "lambda_lambda"}, {"tol", 0.05}, {"require_decreasing", true}}}}},
            {"seed", 1}};
  if (name == "theorem-ss")
    return {{"name", name},
            {"measure", to_json(MeasureSpec{fixtures::rotating_quarter()})},
            {"maps", {{"m", 5}, {"n", 3}}},
            {"orbit", {{"N", {1000, 10000}}, {"M", 20}}},
            {"analyses", {{"equidist", {{"K", 8}, {"target", "lambda_lambda"}, {"require_decreasing", true}}}}},
            {"seed", 1}};
  if (name == "counterexample")
    return {{"name", name},
            {"measure", to_json(MeasureSpec{fixtures::mixed_4x2()})},
            {"maps", {{"m", 3}, {"n", 2}}},
            {"analyses",
             {{"equidist", off},
              {"dimension",
               {{"samples", 100000},
                {"depth", 60},
                {"bounds", {{"P1", {0.40, 0.60}}, {"mu", {0.85, 1.10}}, {"45", {0.85, 1.10}}}},
                {"expect_flagged", json::array()}}},
              {"checks", {{"depth", 60}}}}},
            {"seed", 1}};
  if (name == "scenery-period")
    return {{"name", name},
            {"measure",
             {{"kind", "product_bernoulli"},
              {"base", 3},
              {"weights", {{"1/4", "0", "1/4"}, {"0", "0", "0"}, {"1/4", "0", "1/4"}}}}},
            {"maps", {{"m", 2}, {"n", 2}}},
            {"analyses",
             {{"equidist", off},
              {"scenery",
               {{"J", 64},
                {"anchors", 4},
                {"observables", {"left_half_mass", "disk_mass", "covariance_angle", "log_anisotropy"}},
                {"require", {"disk_mass"}},
                {"expected_inverse_log", 3}}},
              {"checks", off}}},
            {"seed", 1}};
  throw std::invalid_argument("unknown demo '" + name + "'");
}

inline ExperimentConfig demo_config(const std::string& name) { return config_from_json(demo_config_json(name)); }

}  // namespace torus_equidist
