#include "cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

namespace fs = std::filesystem;

namespace pwainv::cli {

namespace {

const std::vector<std::string> kCommands{"simulate", "invert", "stable-invert", "ilc", "bench-printhead", "check"};

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

PadMode parse_pad_mode(const std::string& s) {
  if (s == "force-zero") return PadMode::ForceZero;
  if (s == "hold") return PadMode::HoldEndpoints;
  throw UsageError("pad_mode", "pad_mode must be 'force-zero' or 'hold', got '" + s + "'");
}

const char* pad_mode_name(PadMode m) { return m == PadMode::ForceZero ? "force-zero" : "hold"; }

std::uint64_t parse_seed(const std::string& field, const std::string& text) {
  try {
    if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) throw std::invalid_argument(text);
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw UsageError(field, field + " must be a non-negative integer, got '" + text + "'");
  }
}

std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty() || base.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base) / p).string();
}

// Values from a --config document; every member is optional.
void apply_file(RunConfig& cfg, const Json& j, const std::string& base) {
  auto str = [&](const char* key, std::string& dst, bool path) {
    if (j.contains(key)) dst = path ? resolve(base, j.at(key).get<std::string>()) : j.at(key).get<std::string>();
  };
  try {
    str("model", cfg.model_path, true);
    str("ref", cfg.reference_path, true);
    str("input", cfg.input_path, true);
    str("out", cfg.output_dir, true);
    str("degree", cfg.degree, false);
    cfg.anchor_k = j.value("anchor_k", cfg.anchor_k);
    cfg.stable.lead_pad = j.value("lead_pad", cfg.stable.lead_pad);
    cfg.stable.trail_pad = j.value("trail_pad", cfg.stable.trail_pad);
    if (j.contains("pad_mode")) cfg.stable.pad_mode = parse_pad_mode(j.at("pad_mode").get<std::string>());
    if (j.contains("selection_cost"))
      cfg.stable.selection_cost = parse_selection_cost(j.at("selection_cost").get<std::string>());
    cfg.stable.solve_tolerance = j.value("solve_tolerance", cfg.stable.solve_tolerance);
    cfg.stable.forcing_tolerance = j.value("forcing_tolerance", cfg.stable.forcing_tolerance);
    cfg.stable.require_vanishing_forcing = j.value("require_vanishing_forcing", cfg.stable.require_vanishing_forcing);
    cfg.decoupling.block_residual = j.value("block_residual_tolerance", cfg.decoupling.block_residual);
    cfg.decoupling.hyperbolicity_margin = j.value("hyperbolicity_margin", cfg.decoupling.hyperbolicity_margin);
    cfg.assumptions.a5_tolerance = j.value("a5_tolerance", cfg.assumptions.a5_tolerance);
    cfg.assumptions.a6_tolerance = j.value("a6_tolerance", cfg.assumptions.a6_tolerance);
    cfg.assumptions.cap = j.value("degree_cap", cfg.assumptions.cap);
    if (j.contains("scheme")) cfg.scheme = parse_scheme(j.at("scheme").get<std::string>());
    if (j.contains("gain")) cfg.gain = j.at("gain").get<double>();
    cfg.trials = j.value("trials", cfg.trials);
    cfg.dump_trajectories = j.value("dump_trajectories", cfg.dump_trajectories);
    // Bench settings live under "bench" or at the top level of a bench config file.
    const Json& bench = j.contains("bench") ? j.at("bench") : j;
    cfg.bench = bench_config_from_json(bench, cfg.bench);
    if (bench.contains("noise") && bench.at("noise").contains("seed")) {
      cfg.seed = cfg.bench.seed;
      cfg.seed_source = "file";
    }
    if (j.contains("seed")) {
      const Json& s = j.at("seed");
      cfg.seed = s.is_string() ? parse_seed("seed", s.get<std::string>()) : s.get<std::uint64_t>();
      cfg.seed_source = "file";
    }
  } catch (const Json::exception& e) {
    throw UsageError("config", "config file: " + std::string(e.what()));
  } catch (const Error& e) {
    throw UsageError("config", "config file: " + e.message());
  }
}

void require_path(const std::string& field, const std::string& path, const std::string& flag) {
  if (path.empty()) throw UsageError(field, "missing " + field + " path (" + flag + ")");
  if (!fs::exists(path)) throw UsageError(field, field + " path '" + path + "' does not exist");
}

int parse_degree(const std::string& s) {
  if (s == "auto") return -1;
  if (s == "0" || s == "1" || s == "2") return s[0] - '0';
  throw UsageError("degree", "degree must be 0, 1, 2 or auto, got '" + s + "'");
}

std::string timestamp() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

Json tolerances_json(const RunConfig& cfg) {
  return Json{{"solve", cfg.stable.solve_tolerance},
              {"forcing", cfg.stable.forcing_tolerance},
              {"block_residual", cfg.decoupling.block_residual},
              {"hyperbolicity_margin", cfg.decoupling.hyperbolicity_margin},
              {"a5", cfg.assumptions.a5_tolerance},
              {"a6", cfg.assumptions.a6_tolerance},
              {"nonzero", kNonzeroTolerance}};
}

void write_meta(const RunConfig& cfg, const fs::path& dir, Json extra = Json::object()) {
  Json j{{"tool", "pwainv"},
         {"version", PWAINV_VERSION},
         {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                       std::to_string(EIGEN_MINOR_VERSION)},
         {"command", cfg.command},
         {"seed", cfg.seed},
         {"seed_source", cfg.seed_source},
         {"tolerances", tolerances_json(cfg)},
         {"timestamp", timestamp()}};
  for (auto& [k, v] : extra.items()) j[k] = v;
  write_json_file((dir / "meta.json").string(), j);
}

fs::path prepare_dir(const std::string& dir) {
  const fs::path p = dir.empty() ? fs::path(".") : fs::path(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create output directory '" + p.string() + "': " + ec.message());
  return p;
}

Trajectory relabel(Trajectory t, const std::string& label) {
  t.label = label;
  return t;
}

// Anchor step inside the horizon: the configured one, else the first step.
long anchor_for(const std::optional<Horizon>& h, long anchor) {
  if (h && !h->contains(anchor) && h->end > h->begin) return h->begin;
  return anchor;
}

// Model with its exogenous signal bound to r when the schedule supports it.
std::shared_ptr<const PwaModel> bind_reference(std::shared_ptr<const PwaModel> model, const Trajectory& r) {
  if (!model->schedule().rebindable()) return model;
  return std::make_shared<const PwaModel>(model->with_schedule(model->schedule().rebind(r)));
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
  const LoadedModel lm = load_model_file(cfg.model_path);
  const Trajectory u = read_csv(cfg.input_path);
  const SimulationResult sim = simulate(*lm.model, Vec::Zero(lm.model->n_x()), u);
  const fs::path dir = prepare_dir(cfg.output_dir);
  write_csv((dir / "y.csv").string(), relabel(sim.y, "y"));
  write_csv((dir / "x.csv").string(), relabel(sim.x, "x"));
  write_csv((dir / "delta.csv").string(), relabel(sim.delta, "delta"));
  write_meta(cfg, dir, {{"model", cfg.model_path}, {"input", cfg.input_path}});
  out << Json{{"status", "ok"}, {"steps", u.size()}, {"out", dir.string()}}.dump() << '\n';
  return 0;
}

int cmd_invert(const RunConfig& cfg, std::ostream& out) {
  const LoadedModel lm = load_model_file(cfg.model_path);
  auto model = lm.model;
  std::optional<Trajectory> r;
  if (!cfg.reference_path.empty()) {
    r = read_csv(cfg.reference_path);
    model = bind_reference(model, *r);
  }
  const int degree = lm.inverse_mu ? *lm.inverse_mu : parse_degree(cfg.degree);
  const InversePwaModel inv = invert(model, degree, anchor_for(model->horizon(), cfg.anchor_k));
  Json summary{{"status", "ok"}, {"mu_tilde", inv.mu_tilde()}, {"keys", inv.key_count()}, {"state_dim", inv.state_dim()}};
  if (!cfg.output_dir.empty() || r) {
    const fs::path dir = prepare_dir(cfg.output_dir);
    write_json_file((dir / "inverse.json").string(), inverse_to_json(inv));
    if (r) {
      const InverseRun run = propagate_inverse(inv, Vec::Zero(inv.state_dim()), *r);
      write_csv((dir / "u.csv").string(), run.u);
      // State at the steps where u is defined.
      write_csv((dir / "x.csv").string(), Trajectory(run.x.start_k, run.x.samples.leftCols(run.u.size()), "x"));
    }
    write_meta(cfg, dir, {{"model", cfg.model_path}, {"degree", cfg.degree}});
    summary["out"] = dir.string();
  } else {
    summary["inverse"] = inverse_to_json(inv);
  }
  out << summary.dump(2) << '\n';
  return 0;
}

int cmd_stable_invert(const RunConfig& cfg, std::ostream& out) {
  const LoadedModel lm = load_model_file(cfg.model_path);
  const Trajectory r = read_csv(cfg.reference_path);
  const int degree = lm.inverse_mu ? *lm.inverse_mu : parse_degree(cfg.degree);
  StableInversionConfig sc = cfg.stable;
  const bool padded = sc.lead_pad > 0 || sc.trail_pad > 0;

  auto model = bind_reference(lm.model, r);
  auto inv = std::make_unique<InversePwaModel>(invert(model, degree, anchor_for(model->horizon(), cfg.anchor_k)));
  Trajectory rp = r;
  if (padded) {
    if (model->schedule().rebindable()) {
      // The pad steps only exist once the exogenous signal covers them.
      StableInversionConfig hold = sc;
      hold.pad_mode = PadMode::HoldEndpoints;
      rp = pad_reference(*inv, r, hold);
      model = bind_reference(lm.model, rp);
      inv = std::make_unique<InversePwaModel>(
          invert(model, inv->mu_tilde(), anchor_for(model->horizon(), cfg.anchor_k)));
    }
    rp = pad_reference(*inv, r, sc);
  }
  const long anchor = anchor_for(inv->horizon(), cfg.anchor_k);
  const Decoupling dec = compute_decoupling(*inv, std::nullopt, anchor, cfg.decoupling);
  const SwitchDependency sd = classify_switching(*inv, dec, 1e-9, anchor);
  const StableInversionResult res = sd.kind == SwitchDependencyKind::UnstableModes
                                        ? stable_invert_unstable_switching(*inv, dec, rp, sc)
                                        : stable_invert(*inv, dec, rp, sc);

  const fs::path dir = prepare_dir(cfg.output_dir);
  write_csv((dir / "u.csv").string(), res.u);
  write_csv((dir / "x.csv").string(), res.x);
  write_csv((dir / "delta.csv").string(), res.delta);
  Json report{{"status", "ok"},
              {"mu_tilde", inv->mu_tilde()},
              {"selection_cost", to_string(sc.selection_cost)},
              {"pad_mode", pad_mode_name(sc.pad_mode)},
              {"report", to_json(res.report)},
              {"decoupling", to_json(dec)}};
  write_json_file((dir / "report.json").string(), report);
  write_meta(cfg, dir, {{"model", cfg.model_path}, {"ref", cfg.reference_path}});
  out << report.dump(2) << '\n';
  return 0;
}

int cmd_check(const RunConfig& cfg, std::ostream& out) {
  const LoadedModel lm = load_model_file(cfg.model_path);
  AssumptionOptions opts = cfg.assumptions;
  opts.anchor_k = anchor_for(lm.model->horizon(), cfg.anchor_k);
  Json j = to_json(check_assumptions(*lm.model, opts));
  // Decoupling verdict for the inverse, when one exists.
  try {
    const int degree = lm.inverse_mu ? *lm.inverse_mu : parse_degree(cfg.degree);
    const InversePwaModel inv = invert(lm.model, degree, opts.anchor_k);
    const long anchor = anchor_for(inv.horizon(), opts.anchor_k);
    const Decoupling dec = compute_decoupling(inv, std::nullopt, anchor, cfg.decoupling);
    const SwitchDependency sd = classify_switching(inv, dec, 1e-9, anchor);
    j["A9"] = Json{{"pass", true}, {"decoupling", to_json(dec)}};
    j["A9a"] = Json{{"pass", sd.kind == SwitchDependencyKind::StableModes},
                    {"unstable_block_norm", sd.unstable_block_norm},
                    {"stable_block_norm", sd.stable_block_norm}};
  } catch (const Error& e) {
    j["A9"] = Json{{"pass", false}, {"error", to_json(e)}};
  }
  out << j.dump(2) << '\n';
  return 0;
}

double scheme_gain(const RunConfig& cfg) {
  if (cfg.gain) return *cfg.gain;
  switch (cfg.scheme) {
    case IlcScheme::Ililc: return cfg.bench.gains.ililc;
    case IlcScheme::Gradient: return cfg.bench.gains.gradient;
    case IlcScheme::PType: return cfg.bench.gains.ptype;
  }
  return 1.0;
}

std::string trials_csv(const std::vector<TrialRecord>& h, const std::string& scenario = "") {
  std::string s = scenario.empty() ? "trial,nrmse,peak\n" : "scenario,trial,nrmse,peak\n";
  for (const auto& t : h) {
    if (!scenario.empty()) s += scenario + ",";
    s += std::to_string(t.trial) + "," + g17(t.nrmse) + "," + g17(t.peak) + "\n";
  }
  return s;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  if (!f) throw Error(ErrorCode::Io, "cannot write '" + p.string() + "'");
  f << text;
}

int cmd_ilc(const RunConfig& cfg, std::ostream& out) {
  const PrintheadBench bench(cfg.bench);
  const double gain = scheme_gain(cfg);
  const std::vector<TrialRecord> h = bench.run_scheme(cfg.scheme, gain, cfg.trials);
  const std::string csv = trials_csv(h);
  if (cfg.output_dir.empty()) {
    out << csv;
    return 0;
  }
  const fs::path dir = prepare_dir(cfg.output_dir);
  write_text(dir / "trials.csv", csv);
  if (cfg.dump_trajectories) {
    const long k0 = bench.reference_control().start_k;
    write_csv((dir / "r.csv").string(), Trajectory::scalar(k0 + bench.mu(), bench.lifted_reference(), "r"));
    for (const auto& t : h) {
      write_csv((dir / ("u_trial" + std::to_string(t.trial) + ".csv")).string(), Trajectory::scalar(k0, t.u, "u"));
      write_csv((dir / ("y_trial" + std::to_string(t.trial) + ".csv")).string(),
                Trajectory::scalar(k0 + bench.mu(), t.y, "y"));
    }
  }
  write_meta(cfg, dir, {{"scheme", to_string(cfg.scheme)}, {"gain", gain}, {"trials", cfg.trials},
                        {"bench", bench_config_to_json(cfg.bench)}});
  out << csv;
  return 0;
}

int cmd_bench(const RunConfig& cfg, std::ostream& out) {
  const BenchResults res = run_benchmark(cfg.bench);
  const fs::path dir = prepare_dir(cfg.output_dir);
  std::string table = "scenario,nrmse,peak_error\n";
  std::string trials = "scenario,trial,nrmse,peak\n";
  const PrintheadBench bench(cfg.bench);
  const long k0 = bench.reference_control().start_k;
  const int mu = bench.mu();
  for (const auto& s : res.scenarios) {
    table += s.name + "," + g17(s.nrmse) + "," + g17(s.peak) + "\n";
    if (!s.trials.empty()) {
      const std::string t = trials_csv(s.trials, s.name);
      trials += t.substr(t.find('\n') + 1);
    }
    write_csv((dir / (s.name + "_u.csv")).string(), Trajectory::scalar(k0, s.u, "u"));
    write_csv((dir / (s.name + "_y.csv")).string(), Trajectory::scalar(k0 + mu, s.y, "y"));
  }
  write_csv((dir / "r.csv").string(), Trajectory::scalar(k0 + mu, bench.lifted_reference(), "r"));
  write_text(dir / "table.csv", table);
  write_text(dir / "trials.csv", trials);
  write_meta(cfg, dir,
             {{"gains", {{"ililc", res.gains.ililc}, {"gradient", res.gains.gradient}, {"ptype", res.gains.ptype}}},
              {"self_inversion", {{"nrmse", res.self_inversion_nrmse}, {"peak", res.self_inversion_peak}}},
              {"seconds", res.seconds},
              {"bench", bench_config_to_json(cfg.bench)}});
  out << table;
  return 0;
}

}  // namespace

RunConfig parse_config(const std::vector<std::string>& args) {
  CLI::App app{"pwainv: PWA inversion and iterative learning control"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::string config, model, ref, input, outdir, seed, degree, pad_mode, cost, scheme;
  long anchor = 0;
  int lead = 0, trail = 0, trials = 0, cap = 0;
  double gain = 0, a5 = 0, a6 = 0, solve_tol = 0, forcing_tol = 0, block_tol = 0, margin = 0;
  bool vanish = false, dump = false, tune = false;
  std::map<std::string, CLI::Option*> opt;

  std::map<std::string, CLI::App*> sub;
  const std::map<std::string, std::string> about{
      {"simulate", "Simulate a model from the zero state"},
      {"invert", "Build the explicit inverse; propagate it over --ref when given"},
      {"stable-invert", "Bounded two-sided inversion of a reference"},
      {"ilc", "Run one learning scheme on the printhead benchmark"},
      {"bench-printhead", "Run the five printhead scenarios"},
      {"check", "Report assumption verdicts and the decoupling"}};
  for (const auto& c : kCommands) sub[c] = app.add_subcommand(c, about.at(c));
  auto add = [&](const std::vector<std::string>& cmds, const std::string& key, const std::string& flag, auto& var,
                 const std::string& help) {
    for (const auto& c : cmds) {
      CLI::Option* o = sub[c]->add_option(flag, var, help);
      opt[c + key] = o;
    }
  };
  auto flag = [&](const std::vector<std::string>& cmds, const std::string& key, const std::string& name, bool& var,
                  const std::string& help) {
    for (const auto& c : cmds) opt[c + key] = sub[c]->add_flag(name, var, help);
  };
  const std::vector<std::string> all = kCommands;
  const std::vector<std::string> modelled{"simulate", "invert", "stable-invert", "check"};
  const std::vector<std::string> inverting{"invert", "stable-invert", "check"};
  const std::vector<std::string> bench_like{"ilc", "bench-printhead"};

  add(all, "config", "--config", config, "JSON config file; flags override its values");
  add(all, "out", "--out", outdir, "Output directory");
  add(all, "seed", "--seed", seed, "Random seed (falls back to PWAINV_SEED)");
  add(modelled, "model", "--model", model, "Model JSON file");
  add({"invert", "stable-invert"}, "ref", "--ref", ref, "Reference / output trajectory CSV");
  add({"simulate"}, "input", "--input", input, "Input trajectory CSV");
  add(inverting, "degree", "--degree", degree, "Relative degree: 0, 1, 2 or auto");
  add(modelled, "anchor", "--anchor-k", anchor, "Anchor time step for time-varying schedules");
  add({"stable-invert"}, "lead", "--lead-pad", lead, "Samples prepended to the reference");
  add({"stable-invert"}, "trail", "--trail-pad", trail, "Samples appended to the reference");
  add({"stable-invert"}, "pad_mode", "--pad-mode", pad_mode, "force-zero or hold");
  add({"stable-invert"}, "cost", "--selection-cost", cost, "state-jump, input-norm or input-jump");
  add({"stable-invert"}, "solve_tol", "--solve-tol", solve_tol, "Region membership tolerance");
  add({"stable-invert"}, "forcing_tol", "--forcing-tol", forcing_tol, "End-of-horizon forcing tolerance");
  flag({"stable-invert"}, "vanish", "--require-vanishing-forcing", vanish, "Fail when the forcing does not vanish");
  add({"stable-invert", "check"}, "block_tol", "--block-residual-tol", block_tol, "Decoupling residual tolerance");
  add({"stable-invert", "check"}, "margin", "--hyperbolicity-margin", margin, "Minimum distance from the unit circle");
  add({"check"}, "a5", "--a5-tol", a5, "A5 nonzero tolerance");
  add({"check"}, "a6", "--a6-tol", a6, "A6 residual tolerance");
  add({"check"}, "cap", "--degree-cap", cap, "Relative degree search cap");
  add({"ilc"}, "scheme", "--scheme", scheme, "ililc, gradient or ptype");
  add({"ilc"}, "gain", "--gain", gain, "Learning gain");
  add(bench_like, "trials", "--trials", trials, "Number of trials");
  flag({"ilc"}, "dump", "--dump-trajectories", dump, "Write u/y CSVs for every trial");
  flag({"bench-printhead"}, "tune", "--tune", tune, "Line-search the learning gains");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    throw UsageError("help", app.help());
  } catch (const CLI::CallForAllHelp&) {
    throw UsageError("help", app.help("", CLI::AppFormatMode::All));
  } catch (const CLI::ParseError& e) {
    throw UsageError("arguments", e.what());
  }

  RunConfig cfg;
  for (const auto& c : kCommands)
    if (sub[c]->parsed()) cfg.command = c;
  auto given = [&](const std::string& key) {
    auto it = opt.find(cfg.command + key);
    return it != opt.end() && it->second->count() > 0;
  };

  if (given("config")) {
    require_path("config", config, "--config");
    Json j;
    try {
      j = read_json_file(config);
    } catch (const Error& e) {
      throw UsageError("config", e.message());
    }
    cfg.config_path = config;
    apply_file(cfg, j, fs::path(config).parent_path().string());
  }
  if (given("seed")) {
    cfg.seed = parse_seed("seed", seed);
    cfg.seed_source = "flag";
  } else if (cfg.seed_source == "default") {
    if (const char* env = std::getenv("PWAINV_SEED"); env && *env) {
      cfg.seed = parse_seed("PWAINV_SEED", env);
      cfg.seed_source = "env";
    }
  }
  cfg.bench.seed = cfg.seed;

  if (given("model")) cfg.model_path = model;
  if (given("ref")) cfg.reference_path = ref;
  if (given("input")) cfg.input_path = input;
  if (given("out")) cfg.output_dir = outdir;
  if (given("degree")) cfg.degree = degree;
  if (given("anchor")) cfg.anchor_k = anchor;
  if (given("lead")) cfg.stable.lead_pad = lead;
  if (given("trail")) cfg.stable.trail_pad = trail;
  if (given("pad_mode")) cfg.stable.pad_mode = parse_pad_mode(pad_mode);
  if (given("cost")) {
    try {
      cfg.stable.selection_cost = parse_selection_cost(cost);
    } catch (const Error& e) {
      throw UsageError("selection_cost", e.message());
    }
  }
  if (given("solve_tol")) cfg.stable.solve_tolerance = solve_tol;
  if (given("forcing_tol")) cfg.stable.forcing_tolerance = forcing_tol;
  if (given("vanish")) cfg.stable.require_vanishing_forcing = vanish;
  if (given("block_tol")) cfg.decoupling.block_residual = block_tol;
  if (given("margin")) cfg.decoupling.hyperbolicity_margin = margin;
  if (given("a5")) cfg.assumptions.a5_tolerance = a5;
  if (given("a6")) cfg.assumptions.a6_tolerance = a6;
  if (given("cap")) cfg.assumptions.cap = cap;
  if (given("scheme")) {
    try {
      cfg.scheme = parse_scheme(scheme);
    } catch (const Error& e) {
      throw UsageError("scheme", e.message());
    }
  }
  if (given("gain")) cfg.gain = gain;
  if (given("trials")) cfg.trials = trials;
  if (given("dump")) cfg.dump_trajectories = dump;
  if (given("tune")) cfg.bench.tune_gains = tune;
  if (cfg.command == "bench-printhead" || cfg.command == "ilc") cfg.bench.trials = cfg.trials;

  // Validation.
  if (cfg.command == "simulate" || cfg.command == "invert" || cfg.command == "stable-invert" ||
      cfg.command == "check")
    require_path("model", cfg.model_path, "--model");
  if (cfg.command == "simulate") require_path("input", cfg.input_path, "--input");
  if (cfg.command == "stable-invert") require_path("ref", cfg.reference_path, "--ref");
  if (cfg.command == "invert" && !cfg.reference_path.empty()) require_path("ref", cfg.reference_path, "--ref");
  parse_degree(cfg.degree);
  if (cfg.stable.lead_pad < 0) throw UsageError("lead_pad", "lead_pad must be non-negative");
  if (cfg.stable.trail_pad < 0) throw UsageError("trail_pad", "trail_pad must be non-negative");
  if (cfg.trials < 1) throw UsageError("trials", "trials must be at least 1");
  if (cfg.gain && !(*cfg.gain > 0.0)) throw UsageError("gain", "gain must be positive");
  return cfg;
}

int dispatch(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    if (cfg.command == "simulate") return cmd_simulate(cfg, out);
    if (cfg.command == "invert") return cmd_invert(cfg, out);
    if (cfg.command == "stable-invert") return cmd_stable_invert(cfg, out);
    if (cfg.command == "check") return cmd_check(cfg, out);
    if (cfg.command == "ilc") return cmd_ilc(cfg, out);
    if (cfg.command == "bench-printhead") return cmd_bench(cfg, out);
    err << "error: unknown command '" << cfg.command << "'\n";
    return kUsageExit;
  } catch (const UsageError& e) {
    err << "usage error (" << e.field << "): " << e.what() << '\n';
    return kUsageExit;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    if (!e.assumption().empty()) err << "assumption " << e.assumption() << " is violated\n";
    const Json report{{"status", "error"}, {"command", cfg.command}, {"error", to_json(e)}};
    err << report.dump() << '\n';
    if (!cfg.output_dir.empty()) {
      try {
        const fs::path dir = prepare_dir(cfg.output_dir);
        write_json_file((dir / "report.json").string(), report);
      } catch (const Error&) {
      }
    }
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorCode::Generic);
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  try {
    cfg = parse_config(args);
  } catch (const UsageError& e) {
    if (e.field == "help") {
      out << e.what();
      return 0;
    }
    err << "usage error (" << e.field << "): " << e.what() << '\n';
    return kUsageExit;
  }
  return dispatch(cfg, out, err);
}

}  // namespace pwainv::cli
