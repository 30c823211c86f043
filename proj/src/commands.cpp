#include "mcl/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <thread>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "mcl/acceptance.hpp"
#include "mcl/orderstats.hpp"
#include "mcl/quadrature.hpp"

namespace mcl {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) { return fmt::format("{:.17g}", v); }

// JSON has no NaN; write null instead.
json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

json audit_json(const BoundAudit& a) {
  json terms = json::object();
  for (const auto& [k, v] : a.terms) terms[k] = jnum(v);
  return {{"lhs", jnum(a.lhs)},
          {"rhs", jnum(a.rhs)},
          {"holds", a.holds},
          {"schedule_matches", a.schedule_matches},
          {"terms", terms}};
}

std::string utc_stamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

/// Runs one seed and writes its directory.
fs::path execute_one(const ExperimentConfig& config, const Objective& problem, const AlgoConfig& algo,
                     std::string_view kind, unsigned threads) {
  RunOptions opts;
  opts.threads = threads;
  const RunTrace trace = run(problem, algo, opts);
  const GapReport gaps = gap_report(problem, trace, {200000, algo.seed});

  const fs::path dir = create_run_directory(config.output_dir, kind, algo.seed);
  ExperimentConfig echo = config;
  echo.algo = algo;
  echo.seeds = {algo.seed};
  write_json(dir / "config.json", to_json(echo));
  {
    std::ofstream out(dir / "trace.csv");
    write_trace_csv(trace, out);
  }
  {
    std::ofstream out(dir / "gaps.csv");
    write_gaps_csv(gaps, out);
  }
  write_json(dir / "summary.json", summarize_run(echo, trace, gaps));
  return dir;
}

template <class F>
int guarded(CommandContext& ctx, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    ctx.err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    ctx.err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    ctx.err << "numerical error at round " << e.round() << ": " << e.what() << '\n';
    return kExitNumerical;
  } catch (const QuadratureError& e) {
    ctx.err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  }
}

ExperimentConfig load_expecting(const fs::path& path, StudyKind kind) {
  ExperimentConfig c = load_config(path);
  if (c.study != kind) {
    throw ConfigError("study", "expected '" + std::string(to_string(kind)) + "' for this command, got '" +
                                   std::string(to_string(c.study)) + "'");
  }
  return c;
}

}  // namespace

unsigned threads_from_env() {
  if (const char* v = std::getenv("MCL_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (end != v && *end == '\0' && n > 0) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

fs::path create_run_directory(const fs::path& base, std::string_view kind, std::uint64_t seed) {
  fs::create_directories(base);
  const std::string stem = fmt::format("{}-{}-{}", kind, utc_stamp(), seed);
  for (int k = 1;; ++k) {
    const fs::path dir = base / (k == 1 ? stem : fmt::format("{}-{}", stem, k));
    // create_directory returns false when it already exists: never reuse.
    if (fs::create_directory(dir)) return dir;
  }
}

void write_trace_csv(const RunTrace& trace, std::ostream& out) {
  out << "t,x_hash,grad_l1,grad_l2sq,median_l1,gap_l1,gap_l2sq,direction_l2,w_count,"
         "mixed_measure,uplink_bits,downlink_bits\n";
  for (const RoundRecord& r : trace.rounds) {
    fmt::print(out, "{},{:016x},{},{},{},{},{},{},{},{},{},{}\n", r.t, r.x_hash, num(r.grad_l1),
               num(r.grad_l2sq), num(r.median_l1), num(r.gap_l1), num(r.gap_l2sq),
               num(r.direction_l2), r.w_count, num(r.mixed_measure), r.uplink_bits,
               r.downlink_bits);
  }
}

void write_gaps_csv(const GapReport& gaps, std::ostream& out) {
  out << "t,gap_l1,gap_l2sq,max_abs_gap,sigma_m,expected_median_l2,w_count\n";
  for (const GapRow& r : gaps.rows) {
    fmt::print(out, "{},{},{},{},{},{},{}\n", r.t, num(r.gap_l1), num(r.gap_l2sq), num(r.max_abs_gap),
               num(r.sigma_m), num(r.expected_median_l2), r.w_count);
  }
}

json summarize_run(const ExperimentConfig& config, const RunTrace& trace, const GapReport& gaps) {
  const StepSchedule schedule = config.algo ? config.algo->step.schedule : StepSchedule::Constant;
  const ConvergenceMeasures m = convergence_measures(trace, trace.seed);
  const BitTotals bits = account_bits(trace);
  json j;
  j["rule"] = std::string(to_string(trace.rule));
  j["workers"] = trace.workers;
  j["dim"] = trace.dim;
  j["T"] = trace.rounds.size();
  j["seed"] = trace.seed;
  j["delta"] = trace.delta;
  if (trace.noise) {
    j["noise"] = {{"family", std::string(to_string(trace.noise->family))},
                  {"b", trace.noise->scale},
                  {"sigma_median", trace.sigma_median}};
  } else {
    j["noise"] = nullptr;
  }
  j["smoothness"] = trace.smoothness;
  j["initial_suboptimality"] = trace.initial_suboptimality;
  j["final_grad_l1"] = trace.final_grad_l1;
  j["final_grad_l2sq"] = trace.final_grad_l2sq;
  j["final_mean_grad_l1"] = trace.final_grad_l1;
  j["final_median_l1"] = trace.final_median_l1;
  j["min_grad_l1"] = trace.min_grad_l1;
  j["min_grad_l2sq"] = trace.min_grad_l2sq;
  j["measures"] = {{"avg_grad_l1", m.avg_grad_l1},
                   {"avg_grad_l2sq", m.avg_grad_l2sq},
                   {"avg_mixed", jnum(m.avg_mixed)},
                   {"random_round", m.random_round},
                   {"grad_l2sq_at_random_round", m.grad_l2sq_at_random_round}};
  j["gaps"] = {{"method", std::string(to_string(gaps.method))},
               {"sigma_m", gaps.sigma_m},
               {"c_bound", gaps.c_bound}};
  j["audits"] = {{"sign_l1", audit_json(sign_bound_audit(trace, gaps, schedule))},
                 {"median_l2sq", audit_json(median_bound_audit(trace, gaps, schedule))}};
  j["bits"] = {{"uplink", bits.uplink}, {"downlink", bits.downlink}};
  return j;
}

std::vector<fs::path> execute_single(const ExperimentConfig& config, unsigned threads) {
  const auto problem = build_problem(*config.problem);
  std::vector<fs::path> dirs;
  for (std::uint64_t seed : config.seeds) {
    AlgoConfig algo = *config.algo;
    algo.seed = seed;
    validate(*problem, algo);
    dirs.push_back(execute_one(config, *problem, algo, "run", threads));
  }
  return dirs;
}

int cmd_run(const fs::path& config_path, CommandContext& ctx) {
  return guarded(ctx, [&] {
    const ExperimentConfig config = load_expecting(config_path, StudyKind::Single);
    for (const fs::path& dir : execute_single(config, ctx.threads)) {
      const json s = json::parse(std::ifstream(dir / "summary.json"));
      fmt::print(ctx.out, "{}  final ||grad||_1 = {:.6g}  avg ||grad||^2 = {:.6g}\n", dir.string(),
                 s["final_grad_l1"].get<double>(), s["measures"]["avg_grad_l2sq"].get<double>());
    }
    return kExitOk;
  });
}

int cmd_sweep(const fs::path& config_path, CommandContext& ctx) {
  return guarded(ctx, [&] {
    const ExperimentConfig config = load_expecting(config_path, StudyKind::Sweep);
    const auto problem = build_problem(*config.problem);
    const NoiseFamily family =
        config.algo->noise ? config.algo->noise->family : NoiseFamily::Gaussian;

    const fs::path root = create_run_directory(config.output_dir, "sweep", config.seeds.front());
    write_json(root / "config.json", to_json(config));
    std::ofstream csv(root / "sweep.csv");
    csv << "b,seed,avg_grad_l1,avg_grad_l2sq,avg_mixed,final_grad_l2sq,run_dir\n";

    ExperimentConfig child = config;
    child.study = StudyKind::Single;
    child.output_dir = root.string();
    for (double b : config.b_grid) {
      for (std::uint64_t seed : config.seeds) {
        AlgoConfig algo = *config.algo;
        algo.seed = seed;
        if (b == 0.0) algo.noise.reset();
        else algo.noise = NoiseConfig{family, b, false};
        validate(*problem, algo);
        const fs::path dir = execute_one(child, *problem, algo, "run", ctx.threads);
        const json s = json::parse(std::ifstream(dir / "summary.json"));
        const json& m = s["measures"];
        fmt::print(csv, "{},{},{},{},{},{},{}\n", num(b), seed, num(m["avg_grad_l1"].get<double>()),
                   num(m["avg_grad_l2sq"].get<double>()),
                   m["avg_mixed"].is_null() ? std::string("nan") : num(m["avg_mixed"].get<double>()),
                   num(s["final_grad_l2sq"].get<double>()), dir.filename().string());
        fmt::print(ctx.out, "b={:<8g} seed={:<4} avg ||grad||^2 = {:.6g}\n", b, seed,
                   m["avg_grad_l2sq"].get<double>());
      }
    }
    ctx.out << root.string() << '\n';
    return kExitOk;
  });
}

int cmd_medianlab(const fs::path& config_path, CommandContext& ctx) {
  return guarded(ctx, [&] {
    const ExperimentConfig config = load_expecting(config_path, StudyKind::MedianLab);
    const MedianLabSpec& lab = *config.medianlab;
    const fs::path root = create_run_directory(config.output_dir, "medianlab", lab.seed);
    write_json(root / "config.json", to_json(config));

    const auto [lo, hi] = std::minmax_element(lab.u.begin(), lab.u.end());
    const double spread = *hi - *lo;
    std::ofstream csv(root / "medianlab.csv");
    csv << "family,n,u_spread,b,gap,variance,asym_mass,method,error_estimate\n";
    json fits = json::object();
    for (NoiseFamily family : lab.families) {
      Vector bs, gaps, vars, asyms;
      for (double b : lab.b_grid) {
        MedianLawQuery q{lab.u, NoiseSpec{family, b}};
        const MedianLawSummary s = median_summary(q, lab.mc_samples, lab.seed);
        fmt::print(csv, "{},{},{},{},{},{},{},{},{}\n", to_string(family), lab.u.size(), num(spread),
                   num(b), num(s.gap), num(s.variance), num(s.asym_mass), to_string(s.method),
                   num(s.error_estimate));
        if (b > 0) {
          bs.push_back(b);
          gaps.push_back(std::abs(s.gap));
          vars.push_back(s.variance);
          asyms.push_back(s.asym_mass);
        }
      }
      json f = json::object();
      auto fit = [&](const char* name, const Vector& ys) {
        try {
          const RateFit r = rate_fit(bs, ys);
          f[name] = {{"slope", r.slope}, {"intercept", r.intercept}, {"r_squared", r.r_squared}};
        } catch (const std::invalid_argument& e) {
          f[name] = {{"slope", nullptr}, {"reason", e.what()}};
        }
      };
      fit("gap", gaps);
      fit("variance", vars);
      fit("asym_mass", asyms);
      fits[std::string(to_string(family))] = f;
      fmt::print(ctx.out, "{:<9} gap slope {}  variance slope {}  asym slope {}\n", to_string(family),
                 f["gap"]["slope"].dump(), f["variance"]["slope"].dump(),
                 f["asym_mass"]["slope"].dump());
    }
    write_json(root / "summary.json", {{"u", lab.u}, {"b_grid", lab.b_grid}, {"fits", fits}});
    ctx.out << root.string() << '\n';
    return kExitOk;
  });
}

int cmd_verify(const VerifyOptions& options, CommandContext& ctx) {
  AcceptanceOptions ao;
  ao.only = options.only;
  ao.corrupt_median = options.corrupt_median;
  ao.threads = ctx.threads;
  std::vector<CriterionResult> results;
  try {
    results = run_acceptance(ao);
  } catch (const std::invalid_argument& e) {
    ctx.err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  bool all = true;
  json arr = json::array();
  for (const CriterionResult& r : results) {
    all = all && r.passed;
    if (options.json) {
      arr.push_back({{"id", r.id}, {"name", r.name}, {"passed", r.passed}, {"detail", r.detail},
                     {"seconds", r.seconds}});
    } else {
      fmt::print(ctx.out, "[{}] {:>2} {:<34} {:8.2f}s  {}\n", r.passed ? "PASS" : "FAIL", r.id, r.name,
                 r.seconds, r.detail);
    }
  }
  if (options.json) {
    ctx.out << json{{"passed", all}, {"criteria", arr}}.dump(2) << '\n';
  } else if (!all) {
    ctx.out << "failed:";
    for (const CriterionResult& r : results) {
      if (!r.passed) ctx.out << ' ' << r.id;
    }
    ctx.out << '\n';
  }
  return all ? kExitOk : kExitVerifyFailed;
}

}  // namespace mcl
