#include "mcl/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace mcl {
namespace {

using nlohmann::json;

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

/// Reads one JSON object, remembering which keys were consumed so that
/// leftovers can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  const json& required(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) throw ConfigError(join(path_, key), "missing required field");
    return *it;
  }

  const json* optional(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string path(const std::string& key) const { return join(path_, key); }

  std::string string(const std::string& key) {
    const json& v = required(key);
    if (!v.is_string()) throw ConfigError(path(key), "expected a string");
    return v.get<std::string>();
  }

  double number(const std::string& key) { return as_number(required(key), path(key)); }

  double number_or(const std::string& key, double fallback) {
    const json* v = optional(key);
    return v ? as_number(*v, path(key)) : fallback;
  }

  std::uint64_t count(const std::string& key) { return as_count(required(key), path(key)); }

  std::uint64_t count_or(const std::string& key, std::uint64_t fallback) {
    const json* v = optional(key);
    return v ? as_count(*v, path(key)) : fallback;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(join(path_, it.key()), "unknown key");
    }
  }

  static double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(path, "expected a finite number");
    return x;
  }

  static std::uint64_t as_count(const json& v, const std::string& path) {
    if (!v.is_number_integer() || (v.is_number_integer() && v.get<std::int64_t>() < 0 &&
                                   !v.is_number_unsigned())) {
      throw ConfigError(path, "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  static Vector as_vector(const json& v, const std::string& path) {
    if (!v.is_array()) throw ConfigError(path, "expected an array of numbers");
    Vector out;
    for (std::size_t k = 0; k < v.size(); ++k) {
      out.push_back(as_number(v[k], path + "[" + std::to_string(k) + "]"));
    }
    return out;
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
auto rethrow_as_config(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

ProblemSpec parse_problem(const json& j) {
  ObjectReader r(j, "problem");
  ProblemSpec spec;
  const std::string family = r.string("family");
  if (family == "quadratic") {
    spec.family = ProblemFamily::Quadratic;
    const json& centers = r.required("centers");
    if (!centers.is_array() || centers.empty()) {
      throw ConfigError(r.path("centers"), "expected a non-empty array of center vectors");
    }
    for (std::size_t i = 0; i < centers.size(); ++i) {
      spec.centers.push_back(
          ObjectReader::as_vector(centers[i], r.path("centers") + "[" + std::to_string(i) + "]"));
      if (spec.centers.back().size() != spec.centers.front().size() || spec.centers.back().empty()) {
        throw ConfigError(r.path("centers"), "all centers must share one non-zero dimension");
      }
    }
  } else if (family == "logistic") {
    spec.family = ProblemFamily::Logistic;
    LogisticGenerator& g = spec.logistic;
    g.workers = r.count_or("workers", g.workers);
    g.dim = r.count_or("dim", g.dim);
    g.samples_per_worker = r.count_or("samples_per_worker", g.samples_per_worker);
    g.classes = r.count_or("classes", g.classes);
    g.classes_per_worker = r.count_or("classes_per_worker", g.classes_per_worker);
    g.separation = r.number_or("separation", g.separation);
    g.spread = r.number_or("spread", g.spread);
    g.l2 = r.number_or("l2", g.l2);
    g.seed = r.count_or("seed", g.seed);
    if (g.workers == 0 || g.dim < 2 || g.samples_per_worker == 0 || g.classes < 2 ||
        g.classes_per_worker == 0 || g.classes_per_worker > g.classes) {
      throw ConfigError("problem", "invalid logistic shape (need workers >= 1, dim >= 2, "
                                   "samples_per_worker >= 1, classes >= 2, "
                                   "1 <= classes_per_worker <= classes)");
    }
    if (g.separation < 0 || g.spread < 0 || g.l2 < 0) {
      throw ConfigError("problem", "separation, spread and l2 must be non-negative");
    }
  } else {
    throw ConfigError(r.path("family"), "expected 'quadratic' or 'logistic'");
  }
  r.finish();
  return spec;
}

std::pair<std::size_t, std::size_t> problem_shape(const ProblemSpec& p) {
  if (p.family == ProblemFamily::Quadratic) return {p.centers.size(), p.centers.front().size()};
  return {p.logistic.workers, p.logistic.dim};
}

NoiseConfig parse_noise(const json& j) {
  ObjectReader r(j, "noise");
  NoiseConfig n;
  n.family = rethrow_as_config(r.path("family"), [&] { return parse_noise_family(r.string("family")); });
  const json* b = r.optional("b");
  const json* schedule = r.optional("schedule");
  if (b && schedule) throw ConfigError("noise", "give either 'b' or 'schedule', not both");
  if (schedule) {
    if (!schedule->is_string() || schedule->get<std::string>() != "coupled") {
      throw ConfigError(r.path("schedule"), "the only schedule is \"coupled\"");
    }
    n.coupled_schedule = true;
  } else if (b) {
    n.scale = ObjectReader::as_number(*b, r.path("b"));
    if (n.scale < 0) throw ConfigError(r.path("b"), "must be non-negative");
  } else {
    throw ConfigError(r.path("b"), "missing required field (or give \"schedule\": \"coupled\")");
  }
  r.finish();
  return n;
}

AlgoConfig parse_algo(const json& j, std::size_t workers, std::size_t dim) {
  ObjectReader r(j, "algo");
  AlgoConfig a;
  a.aggregation = rethrow_as_config(r.path("aggregation"),
                                    [&] { return parse_aggregation_rule(r.string("aggregation")); });
  if (is_sign_rule(a.aggregation) && workers % 2 == 0) {
    throw ConfigError(r.path("aggregation"), "sign aggregation requires an odd number of workers");
  }

  if (const json* gm = r.optional("gradient_mode")) {
    ObjectReader g(*gm, r.path("gradient_mode"));
    const std::string kind = g.string("kind");
    if (kind == "exact") {
      a.gradient.mode = GradientMode::Exact;
    } else if (kind == "minibatch") {
      a.gradient.mode = GradientMode::MiniBatch;
      a.gradient.batch_size = g.count("batch_size");
      if (a.gradient.batch_size == 0) throw ConfigError(g.path("batch_size"), "must be at least 1");
    } else {
      throw ConfigError(g.path("kind"), "expected 'exact' or 'minibatch'");
    }
    g.finish();
  }

  {
    ObjectReader s(r.required("step_size"), r.path("step_size"));
    a.step.schedule =
        rethrow_as_config(s.path("kind"), [&] { return parse_step_schedule(s.string("kind")); });
    if (a.step.schedule == StepSchedule::Constant) {
      a.step.delta = s.number("delta");
      if (!(a.step.delta > 0)) throw ConfigError(s.path("delta"), "must be positive");
    }
    s.finish();
  }

  a.rounds = r.count("T");
  if (a.rounds == 0) throw ConfigError(r.path("T"), "must be at least 1");
  if (const json* x0 = r.optional("x0")) {
    a.x0 = ObjectReader::as_vector(*x0, r.path("x0"));
    if (a.x0.size() != dim) {
      throw ConfigError(r.path("x0"), "has dimension " + std::to_string(a.x0.size()) +
                                          ", problem dimension is " + std::to_string(dim));
    }
  } else {
    a.x0.assign(dim, 0.0);
  }
  a.seed = r.count_or("seed", 1);
  r.finish();
  return a;
}

MedianLabSpec parse_medianlab(const json& j) {
  ObjectReader r(j, "medianlab");
  MedianLabSpec m;
  m.u = ObjectReader::as_vector(r.required("u"), r.path("u"));
  if (m.u.empty() || m.u.size() % 2 == 0) {
    throw ConfigError(r.path("u"), "needs an odd number of entries");
  }
  const json& fams = r.required("families");
  if (!fams.is_array() || fams.empty()) throw ConfigError(r.path("families"), "expected a non-empty array");
  for (const json& f : fams) {
    if (!f.is_string()) throw ConfigError(r.path("families"), "expected family names");
    m.families.push_back(
        rethrow_as_config(r.path("families"), [&] { return parse_noise_family(f.get<std::string>()); }));
  }
  m.b_grid = ObjectReader::as_vector(r.required("b_grid"), r.path("b_grid"));
  if (m.b_grid.empty()) throw ConfigError(r.path("b_grid"), "must be non-empty");
  for (double b : m.b_grid) {
    if (!(b >= 0)) throw ConfigError(r.path("b_grid"), "entries must be non-negative");
  }
  m.mc_samples = r.count_or("mc_samples", m.mc_samples);
  if (m.mc_samples < 1000) throw ConfigError(r.path("mc_samples"), "must be at least 1000");
  m.seed = r.count_or("seed", m.seed);
  r.finish();
  return m;
}

}  // namespace

std::string_view to_string(StudyKind kind) {
  switch (kind) {
    case StudyKind::Single: return "single";
    case StudyKind::Sweep: return "sweep";
    case StudyKind::MedianLab: return "medianlab";
    case StudyKind::Verify: return "verify";
  }
  return "unknown";
}

ExperimentConfig parse_config(const json& j) {
  ObjectReader r(j, "");
  ExperimentConfig c;
  const std::string study = r.string("study");
  if (study == "single") c.study = StudyKind::Single;
  else if (study == "sweep") c.study = StudyKind::Sweep;
  else if (study == "medianlab") c.study = StudyKind::MedianLab;
  else if (study == "verify") c.study = StudyKind::Verify;
  else throw ConfigError("study", "expected single, sweep, medianlab or verify");

  if (const json* out = r.optional("output_dir")) {
    if (!out->is_string() || out->get<std::string>().empty()) {
      throw ConfigError("output_dir", "expected a non-empty string");
    }
    c.output_dir = out->get<std::string>();
  }

  const bool needs_run = c.study == StudyKind::Single || c.study == StudyKind::Sweep;
  if (needs_run) {
    c.problem = parse_problem(r.required("problem"));
    const auto [workers, dim] = problem_shape(*c.problem);
    c.algo = parse_algo(r.required("algo"), workers, dim);
    if (const json* noise = r.optional("noise")) {
      c.algo->noise = parse_noise(*noise);
      if (workers % 2 == 0) throw ConfigError("noise", "noise injection requires an odd number of workers");
    }
    if (c.algo->gradient.mode == GradientMode::MiniBatch) {
      if (c.problem->family != ProblemFamily::Logistic) {
        throw ConfigError("algo.gradient_mode", "minibatch requires a logistic problem");
      }
      if (c.algo->gradient.batch_size > c.problem->logistic.samples_per_worker) {
        throw ConfigError("algo.gradient_mode.batch_size", "exceeds problem.samples_per_worker");
      }
    }

    const json* seeds = r.optional("seeds");
    const std::uint64_t reps = r.count_or("repetitions", seeds ? 0 : 1);
    if (seeds) {
      if (!seeds->is_array() || seeds->empty()) throw ConfigError("seeds", "expected a non-empty array");
      for (std::size_t k = 0; k < seeds->size(); ++k) {
        c.seeds.push_back(ObjectReader::as_count((*seeds)[k], "seeds[" + std::to_string(k) + "]"));
      }
      if (reps != 0 && reps != c.seeds.size()) {
        throw ConfigError("repetitions", "disagrees with the length of 'seeds'");
      }
    } else {
      if (reps == 0) throw ConfigError("repetitions", "must be at least 1");
      for (std::uint64_t k = 0; k < reps; ++k) c.seeds.push_back(c.algo->seed + k);
    }
  } else {
    for (const char* key : {"problem", "algo", "noise", "seeds", "repetitions"}) {
      if (r.optional(key)) throw ConfigError(key, "not used by study '" + study + "'");
    }
  }

  if (c.study == StudyKind::Sweep) {
    ObjectReader s(r.required("sweep"), "sweep");
    c.b_grid = ObjectReader::as_vector(s.required("b_grid"), s.path("b_grid"));
    if (c.b_grid.empty()) throw ConfigError(s.path("b_grid"), "must be non-empty");
    for (double b : c.b_grid) {
      if (!(b >= 0)) throw ConfigError(s.path("b_grid"), "entries must be non-negative");
    }
    s.finish();
  } else if (r.optional("sweep")) {
    throw ConfigError("sweep", "only valid for study 'sweep'");
  }

  if (c.study == StudyKind::MedianLab) {
    c.medianlab = parse_medianlab(r.required("medianlab"));
  } else if (r.optional("medianlab")) {
    throw ConfigError("medianlab", "only valid for study 'medianlab'");
  }
  r.finish();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON in ") + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["study"] = std::string(to_string(c.study));
  j["output_dir"] = c.output_dir;
  if (c.problem) {
    json p;
    if (c.problem->family == ProblemFamily::Quadratic) {
      p["family"] = "quadratic";
      p["centers"] = c.problem->centers;
    } else {
      const LogisticGenerator& g = c.problem->logistic;
      p = {{"family", "logistic"},
           {"workers", g.workers},
           {"dim", g.dim},
           {"samples_per_worker", g.samples_per_worker},
           {"classes", g.classes},
           {"classes_per_worker", g.classes_per_worker},
           {"separation", g.separation},
           {"spread", g.spread},
           {"l2", g.l2},
           {"seed", g.seed}};
    }
    j["problem"] = p;
  }
  if (c.algo) {
    const AlgoConfig& a = *c.algo;
    json algo;
    algo["aggregation"] = std::string(to_string(a.aggregation));
    if (a.gradient.mode == GradientMode::Exact) {
      algo["gradient_mode"] = {{"kind", "exact"}};
    } else {
      algo["gradient_mode"] = {{"kind", "minibatch"}, {"batch_size", a.gradient.batch_size}};
    }
    json step = {{"kind", std::string(to_string(a.step.schedule))}};
    if (a.step.schedule == StepSchedule::Constant) step["delta"] = a.step.delta;
    algo["step_size"] = step;
    algo["T"] = a.rounds;
    algo["x0"] = a.x0;
    algo["seed"] = a.seed;
    j["algo"] = algo;
    if (a.noise) {
      json n = {{"family", std::string(to_string(a.noise->family))}};
      if (a.noise->coupled_schedule) n["schedule"] = "coupled";
      else n["b"] = a.noise->scale;
      j["noise"] = n;
    }
    j["seeds"] = c.seeds;
    j["repetitions"] = c.seeds.size();
  }
  if (c.study == StudyKind::Sweep) j["sweep"] = {{"b_grid", c.b_grid}};
  if (c.medianlab) {
    json fams = json::array();
    for (NoiseFamily f : c.medianlab->families) fams.push_back(std::string(to_string(f)));
    j["medianlab"] = {{"u", c.medianlab->u},
                      {"families", fams},
                      {"b_grid", c.medianlab->b_grid},
                      {"mc_samples", c.medianlab->mc_samples},
                      {"seed", c.medianlab->seed}};
  }
  return j;
}

std::unique_ptr<Objective> build_problem(const ProblemSpec& spec) {
  if (spec.family == ProblemFamily::Quadratic) return std::make_unique<QuadraticEnsemble>(spec.centers);
  return std::make_unique<LogisticEnsemble>(generate_logistic(spec.logistic));
}

}  // namespace mcl
