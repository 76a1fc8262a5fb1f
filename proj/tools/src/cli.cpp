#include "memsde_cli/cli.hpp"

#include "memsde/checks.hpp"
#include "memsde/config.hpp"
#include "memsde/ensemble_io.hpp"
#include "memsde/error.hpp"
#include "memsde/experiments.hpp"
#include "memsde/measure.hpp"
#include "memsde/parallel.hpp"
#include "memsde/report_io.hpp"

#include <CLI11.hpp>

#include <optional>

namespace memsde::cli {

namespace {

const std::vector<std::string> kCommands = {"simulate", "check",       "weak-rate", "invariant",
                                            "moments",  "contraction", "blowup",    "bel-grad"};

struct Outputs {
  bool csv = true;
  bool json = true;
};

Json envelope(const std::string& command, const StudyContext& ctx, Json report) {
  Json j;
  j["schema"] = kSchemaVersion;
  j["command"] = command;
  j["seed"] = ctx.seed;
  j["workers"] = ctx.workers;
  j["report"] = std::move(report);
  return j;
}

std::string label_row(const std::string& label, const std::vector<double>& values) {
  std::string s = label;
  for (double v : values) s += "," + format_double(v);
  return s + "\n";
}

void emit_rate_outputs(OutputDir& dir, const Outputs& o, const std::vector<double>& taus,
                       const std::vector<double>& errors, const std::vector<double>& se,
                       const std::vector<std::size_t>& n_eff, const std::optional<RateFit>& logtau,
                       const std::optional<RateFit>& loglog) {
  if (!o.csv) return;
  dir.write_csv("errors.csv", errors_table(taus, errors, se, n_eff));
  dir.write("rates.csv", rates_csv(logtau, loglog));
}

void run_simulate(const ConfigFile& cfg, const StudyContext& ctx, OutputDir& dir, const Outputs& o) {
  const SdeProblem p = problem_from_config(cfg);
  const SchemeSpec s = scheme_from_config(cfg, p);
  const InitialCondition x0 = x0_from_config(cfg, p);
  const SimulateParams sp = simulate_params_from_config(cfg);
  SimulationOptions opts;
  opts.workers = ctx.workers;
  const Ensemble e = simulate_ensemble(p, s, x0, sp.tau, sp.T, sp.M, ctx.seed, opts);
  if (o.csv) dir.write("ensemble.csv", ensemble_to_csv(e));
  if (sp.binary) dir.write("ensemble.bin", ensemble_to_binary(e));
  if (o.json) {
    Json r;
    r["problem"] = e.meta.problem;
    r["scheme"] = e.meta.scheme;
    r["tau"] = e.meta.tau;
    r["T"] = e.meta.T;
    r["M"] = e.size();
    r["n_diverged"] = e.n_diverged();
    r["diverged_fraction"] = e.diverged_fraction();
    if (e.n_diverged() < e.size()) {
      std::vector<int> orders;
      for (int q = 2; q <= 2.0 * p.constants().p_star; q += 2) orders.push_back(q);
      r["moments"] = to_json(moments(e, orders, ctx.seed, p.constants().p_star));
    } else {
      r["moments"] = nullptr;
    }
    dir.write_json("report.json", envelope("simulate", ctx, r));
  }
}

void run_check(const ConfigFile& cfg, const StudyContext& ctx, OutputDir& dir, const Outputs& o) {
  const SdeProblem p = problem_from_config(cfg);
  const SchemeSpec s = scheme_from_config(cfg, p);
  const CheckParams cp = check_params_from_config(cfg);
  const double tau = cp.tau.value_or(0.5 * p.constants().tau_max());
  std::vector<SampledCheckReport> reports;
  reports.push_back(check_monotonicity(p, cp.n_points, cp.radius, ctx.seed));
  reports.push_back(check_coercivity(p, cp.n_points, cp.radius, ctx.seed));
  for (auto& r : check_scheme_conditions(p, s, tau, cp.n_points, cp.radius, ctx.seed)) reports.push_back(std::move(r));
  const SampledCheckReport ell = check_ellipticity(p, cp.n_points, cp.radius, ctx.seed);

  std::size_t violations = 0;
  Json arr = Json::array();
  for (const auto& r : reports) {
    violations += r.n_violations;
    arr.push_back(to_json(r));
  }
  if (o.json) {
    Json j;
    j["problem"] = p.name();
    j["scheme"] = std::string(to_string(s.kind()));
    j["tau"] = tau;
    j["n_points"] = cp.n_points;
    j["radius"] = cp.radius;
    j["checks"] = arr;
    j["assumption_violations"] = violations;
    // Reported separately: the upper ellipticity bound is not a global property of every
    // built-in problem.
    j["ellipticity"] = to_json(ell);
    dir.write_json("report.json", envelope("check", ctx, j));
  }
  if (o.csv) {
    std::string csv = "assumption,n_points,n_violations,worst_margin,sampled_radius\n";
    for (const auto* r : [&] {
           std::vector<const SampledCheckReport*> all;
           for (const auto& x : reports) all.push_back(&x);
           all.push_back(&ell);
           return all;
         }())
      csv += label_row(std::string(to_string(r->assumption_id)),
                       {static_cast<double>(r->n_points), static_cast<double>(r->n_violations), r->worst_margin,
                        r->sampled_radius});
    dir.write("checks.csv", csv);
  }
}

void run_weak(const ConfigFile& cfg, const StudyContext& ctx, OutputDir& dir, const Outputs& o) {
  const SdeProblem p = problem_from_config(cfg);
  const ConvergenceReport r = weak_error_study(p, scheme_from_config(cfg, p), x0_from_config(cfg, p),
                                               weak_params_from_config(cfg, p), ctx);
  if (o.json) dir.write_json("report.json", envelope("weak-rate", ctx, to_json(r)));
  emit_rate_outputs(dir, o, r.taus, r.errors, r.std_errors, r.n_effective, r.fit_logtau, r.fit_loglog);
}

void run_invariant(const ConfigFile& cfg, const StudyContext& ctx, OutputDir& dir, const Outputs& o) {
  const SdeProblem p = problem_from_config(cfg);
  const ErgodicityReport r = invariant_measure_study(p, scheme_from_config(cfg, p), x0_from_config(cfg, p),
                                                     invariant_params_from_config(cfg), ctx);
  if (o.json) dir.write_json("report.json", envelope("invariant", ctx, to_json(r)));
  emit_rate_outputs(dir, o, r.taus, r.errors, r.std_errors, r.n_effective, r.fit_logtau, r.fit_loglog);
}

void run_moments(const ConfigFile& cfg, const StudyContext& ctx, OutputDir& dir, const Outputs& o) {
  const SdeProblem p = problem_from_config(cfg);
  const MomentStabilityReport r = moment_stability_study(p, scheme_from_config(cfg, p), x0_from_config(cfg, p),
                                                         moment_params_from_config(cfg), ctx);
  if (o.json) dir.write_json("report.json", envelope("moments", ctx, to_json(r)));
  if (o.csv) {
    CsvTable t;
    t.header.push_back("n");
    for (const auto& s : r.series) t.header.push_back("m" + std::to_string(s.order));
    for (std::size_t n = 0; n <= static_cast<std::size_t>(r.N); ++n) {
      std::vector<double> row{static_cast<double>(n)};
      for (const auto& s : r.series) row.push_back(s.values[n]);
      t.rows.push_back(std::move(row));
    }
    dir.write_csv("moments.csv", t);
  }
}

void run_blowup(const ConfigFile& cfg, const StudyContext& ctx, OutputDir& dir, const Outputs& o) {
  const SdeProblem p = problem_from_config(cfg);
  const BlowupReport r = blowup_study(p, x0_from_config(cfg, p), blowup_params_from_config(cfg), ctx);
  if (o.json) dir.write_json("report.json", envelope("blowup", ctx, to_json(r)));
  if (o.csv) {
    CsvTable t;
    t.header.push_back("n");
    for (const auto& s : r.schemes) {
      t.header.push_back(s.scheme + "_m2");
      t.header.push_back(s.scheme + "_m4");
    }
    for (std::size_t n = 0; n <= static_cast<std::size_t>(r.N); ++n) {
      std::vector<double> row{static_cast<double>(n)};
      for (const auto& s : r.schemes) {
        row.push_back(s.second_moment[n]);
        row.push_back(s.fourth_moment[n]);
      }
      t.rows.push_back(std::move(row));
    }
    dir.write_csv("blowup.csv", t);
  }
}

void run_contraction(const ConfigFile& cfg, const StudyContext& ctx, OutputDir& dir, const Outputs& o) {
  const SdeProblem p = problem_from_config(cfg);
  const ContractionReport r =
      contraction_study(p, scheme_from_config(cfg, p), contraction_params_from_config(cfg, p), ctx);
  if (o.json) dir.write_json("report.json", envelope("contraction", ctx, to_json(r)));
  if (o.csv) {
    CsvTable t{{"T", "w1", "se", "baseline_w1", "baseline_se"}, {}};
    for (std::size_t i = 0; i < r.T_list.size(); ++i)
      t.rows.push_back({r.T_list[i], r.w1[i], r.std_errors[i], r.baseline_w1[i], r.baseline_se[i]});
    dir.write_csv("contraction.csv", t);
  }
}

void run_bel(const ConfigFile& cfg, const StudyContext& ctx, OutputDir& dir, const Outputs& o) {
  const SdeProblem p = problem_from_config(cfg);
  const BelGradParams bp = bel_params_from_config(cfg, p);
  const TestFunction phi = *parse_test_function(bp.phi);
  const GradientEstimate bel = bel_gradient(p, phi, bp.bel, ctx);
  std::optional<GradientEstimate> fd;
  if (bp.fd_h) fd = finite_difference_gradient(p, SchemeSpec::tem(p.gamma()), phi, bp.bel, *bp.fd_h, ctx);
  if (o.json) {
    Json j;
    j["problem"] = p.name();
    j["phi"] = bp.phi;
    j["t"] = bp.bel.t;
    j["tau"] = bp.bel.tau;
    j["M"] = bp.bel.M;
    j["bel"] = to_json(bel);
    j["finite_difference"] = fd ? to_json(*fd) : Json(nullptr);
    if (fd) {
      const double se = std::sqrt(bel.std_error * bel.std_error + fd->std_error * fd->std_error);
      j["difference"] = bel.estimate - fd->estimate;
      j["combined_se"] = se;
      j["agree"] = std::abs(bel.estimate - fd->estimate) <= 3.0 * se;
    }
    dir.write_json("report.json", envelope("bel-grad", ctx, j));
  }
  if (o.csv) {
    std::string csv = "method,estimate,se,n_used\n";
    csv += label_row("bel", {bel.estimate, bel.std_error, static_cast<double>(bel.n_used)});
    if (fd) csv += label_row("finite_difference", {fd->estimate, fd->std_error, static_cast<double>(fd->n_used)});
    dir.write("gradient.csv", csv);
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Modified Euler methods for SDEs with superlinear coefficients", "memsde");
  std::string command, config_path, out_dir, format = "both";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  app.add_option("command", command, "simulate | check | weak-rate | invariant | moments | blowup | contraction | bel-grad")
      ->required()
      ->check(CLI::IsMember(kCommands));
  app.add_option("--config", config_path, "JSON experiment config")->required();
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--seed", seed, "override the config seed");
  app.add_option("--workers", workers, "worker threads (0 = all cores)");
  app.add_option("--format", format, "csv, json or both")->check(CLI::IsMember({"csv", "json", "both"}));

  if (args.empty()) {
    out << app.help();
    return kExitConfig;
  }
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "memsde: " << e.what() << "\n" << app.help();
    return kExitConfig;
  }

  try {
    ConfigFile cfg = load_config(config_path);
    if (seed) cfg.json["seed"] = *seed;
    if (workers) cfg.json["workers"] = *workers;
    const StudyContext raw = context_from_config(cfg);
    const StudyContext ctx{raw.seed, resolve_workers(raw.workers)};
    const Outputs o{format != "json", format != "csv"};
    OutputDir dir(out_dir);

    if (command == "simulate") run_simulate(cfg, ctx, dir, o);
    else if (command == "check") run_check(cfg, ctx, dir, o);
    else if (command == "weak-rate") run_weak(cfg, ctx, dir, o);
    else if (command == "invariant") run_invariant(cfg, ctx, dir, o);
    else if (command == "moments") run_moments(cfg, ctx, dir, o);
    else if (command == "blowup") run_blowup(cfg, ctx, dir, o);
    else if (command == "contraction") run_contraction(cfg, ctx, dir, o);
    else run_bel(cfg, ctx, dir, o);

    dir.finish(cfg.json);
    return kExitOk;
  } catch (const Error& e) {
    err << "memsde: " << e.what() << "\n";
    return e.code() == Errc::ConfigError ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    err << "memsde: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace memsde::cli
