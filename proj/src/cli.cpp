#include "pfr/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "pfr/acpf.hpp"
#include "pfr/case_io.hpp"
#include "pfr/errors.hpp"
#include "pfr/eval.hpp"
#include "pfr/io.hpp"
#include "pfr/lpac.hpp"
#include "pfr/scenarios.hpp"
#include "pfr/train.hpp"

namespace pfr {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string case_path;
  std::string solutions;
  std::string weights = "init";
  std::string method = "wls";
  std::string dataset;
  std::string out;
  std::string source = "lpac";
  std::string lp_file;
  std::string curve;
  std::uint64_t seed = 0;
  int iters = 200;
  double eta = 10.0;
  double tol = 1e-8;
  double sigma = 0.1;
  double train_fraction = 0.8;
  std::size_t count = 100;
  std::size_t batch = 0;
  unsigned threads = 1;
  LpacConfig lpac;
};

Network load_network(const Options& o, std::ostream& err) {
  std::vector<std::string> warnings;
  Network net = load_case_file(o.case_path, &warnings);
  for (const std::string& w : warnings) err << "warning: " << w << '\n';
  return net;
}

fs::path require_out(const Options& o) {
  if (o.out.empty()) throw PreconditionError("--out is required for this command");
  fs::create_directories(o.out);
  return o.out;
}

WlsOptions wls_options(const Options& o) {
  WlsOptions w;
  w.tol = o.tol;
  return w;
}

std::vector<fs::path> solution_paths(const std::string& where) {
  if (where.empty()) throw PreconditionError("--solutions is required for this command");
  std::vector<fs::path> paths;
  if (fs::is_directory(where)) {
    for (const auto& entry : fs::directory_iterator(where)) {
      if (entry.is_regular_file() && entry.path().extension() == ".json") {
        paths.push_back(entry.path());
      }
    }
    std::sort(paths.begin(), paths.end());
  } else if (fs::exists(where)) {
    paths.emplace_back(where);
  } else {
    throw FormatError(fmt::format("{} does not exist", where));
  }
  if (paths.empty()) throw FormatError(fmt::format("no .json solution files in {}", where));
  return paths;
}

WeightVector resolve_weights(const Options& o, const Network& net, const Layout& layout) {
  if (o.weights == "init") return default_initial_weights(layout);
  WeightFile wf = load_weights(o.weights, net);
  if (wf.layout != layout) {
    throw LayoutError(fmt::format("weights in {} were trained for a different measurement layout",
                                  o.weights));
  }
  return std::move(wf.weights);
}

std::vector<ScenarioRecord> split_part(const LoadedDataset& ds, bool train) {
  const auto& idx = train ? ds.manifest.train : ds.manifest.test;
  if (idx.empty()) return ds.records;
  return select(ds.records, idx);
}

std::vector<std::size_t> parse_counts(const std::string& text) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v <= 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::logic_error&) {
      throw PreconditionError(fmt::format("--curve expects positive integers, got '{}'", item));
    }
    pos = comma + 1;
  }
  return out;
}

void cmd_parse(const Options& o, std::ostream& out, std::ostream& err) {
  const Network net = load_network(o, err);
  out << fmt::format("buses {} branches {} generators {} base_mva {} slack {} hash {}\n",
                     net.num_buses(), net.num_branches(), net.num_generators(), net.base_mva(),
                     net.bus(net.slack()).id, network_hash_hex(net));
  if (!o.out.empty()) write_file_atomic(require_out(o) / "case.m", write_case(net));
}

void cmd_pf(const Options& o, std::ostream& out, std::ostream& err) {
  const Network net = load_network(o, err);
  NewtonOptions opts;
  opts.tol = o.tol;
  const NewtonResult res = newton_pf(net, nominal_spec(net), StateVector::flat(net), opts);
  out << fmt::format("converged iterations {} mismatch {:.3e}\n", res.iterations, res.mismatch);
  if (!o.out.empty()) {
    const OperatingPoint op = make_operating_point(net, res.state);
    write_file_atomic(require_out(o) / "pf.json", solution_to_json(net, make_solution(net, op, "ac")));
  }
}

void cmd_lpac(const Options& o, std::ostream& out, std::ostream& err) {
  const Network net = load_network(o, err);
  const LpacModel model = build_lpac(net, o.lpac);
  if (!o.lp_file.empty()) write_file_atomic(o.lp_file, model.lp.to_lp_format());
  const LpacSolution sol = extract_solution(net, model, simplex_solve(model.lp));
  const Certificate cert = check_certificate(model.lp, sol.raw);
  out << fmt::format(
      "objective {:.10g} variables {} rows {} pivots {} primal_violation {:.2e} "
      "dual_violation {:.2e}\n",
      sol.objective, model.lp.num_variables(), model.lp.num_rows(), sol.raw.iterations,
      cert.primal_violation, cert.dual_violation);
  if (!o.out.empty()) {
    SolutionFile file = make_solution(net, lpac_to_measurements(net, sol), "lpac");
    file.p_g = sol.p_g;
    file.q_g = sol.q_g;
    write_file_atomic(require_out(o) / "lpac.json", solution_to_json(net, file));
  }
}

void cmd_scenarios(const Options& o, std::ostream& out, std::ostream& err) {
  const Network net = load_network(o, err);
  const fs::path dir = require_out(o);
  ScenarioSpec spec{o.count, o.sigma, o.seed, o.train_fraction};
  const std::vector<LoadTable> loads = gen_load_scenarios(net, spec);
  DatasetOptions dopts;
  dopts.threads = o.threads;
  dopts.seed = o.seed;
  dopts.lpac = o.lpac;
  Dataset ds;
  std::string source = o.source;
  if (o.source == "synthetic") {
    ds = synth_dataset(net, loads, NoiseProfile{}, dopts);
  } else if (o.source == "lpac") {
    std::vector<std::optional<StateVector>> external;
    if (!o.solutions.empty()) {
      external.resize(loads.size());
      for (std::size_t s = 0; s < loads.size(); ++s) {
        const fs::path p = fs::path(o.solutions) / fmt::format("{:06d}.json", s);
        if (fs::exists(p)) external[s] = solution_state(net, load_solution(p, net));
      }
      source = "lpac+external";
    }
    ds = build_lpac_dataset(net, loads, dopts, external);
  } else {
    throw PreconditionError(fmt::format("unknown --source '{}' (lpac or synthetic)", o.source));
  }
  for (const std::string& line : ds.skipped) err << "warning: " << line << '\n';
  if (ds.records.empty()) throw TrainingError("every scenario failed; no dataset written");
  const Split split = split_indices(ds.records.size(), o.train_fraction, o.seed);
  DatasetManifest man;
  man.network_hash = network_hash_hex(net);
  man.source = source;
  man.seed = o.seed;
  man.sigma = o.sigma;
  man.scenario_count = o.count;
  man.layout = ds.records.front().z.kinds;
  man.train = split.train;
  man.test = split.test;
  save_dataset(dir, net, man, ds.records);
  out << fmt::format("records {} skipped {} train {} test {}\n", ds.records.size(),
                     ds.skipped.size(), split.train.size(), split.test.size());
}

void cmd_restore(const Options& o, std::ostream& out, std::ostream& err) {
  const Network net = load_network(o, err);
  const Method method = method_from_string(o.method);
  const fs::path dir = require_out(o);
  EvalOptions eopts;
  eopts.wls = wls_options(o);
  eopts.pf.tol = o.tol;
  for (const fs::path& path : solution_paths(o.solutions)) {
    const SolutionFile sol = load_solution(path, net);
    ScenarioRecord rec{sol.loads.value_or(LoadTable{}), StateVector::flat(net),
                       solution_measurements(net, sol), sol.formulation};
    std::optional<WeightVector> w;
    if (method == Method::Wls) w = resolve_weights(o, net, rec.z.kinds);
    const OperatingPoint op = restore_record(net, rec, method, w ? &*w : nullptr, eopts);
    SolutionFile restored = make_solution(net, op, fmt::format("restored-{}", o.method));
    restored.loads = sol.loads;
    const fs::path target = dir / (path.stem().string() + ".restored.json");
    write_file_atomic(target, solution_to_json(net, restored));
    const Network scn = sol.loads ? net.with_loads(*sol.loads) : net;
    out << fmt::format("{} -> {} max_violation {:.3e}\n", path.filename().string(),
                       target.filename().string(), constraint_report(scn, op).max());
  }
}

TrainConfig train_config(const Options& o, const Network& net, const Layout& layout) {
  TrainConfig cfg;
  cfg.eta = o.eta;
  cfg.max_iter = o.iters;
  cfg.rng_seed = o.seed;
  cfg.batch_size = o.batch;
  cfg.w_init = resolve_weights(o, net, layout);
  cfg.gradient.wls = wls_options(o);
  cfg.gradient.threads = o.threads;
  return cfg;
}

void cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  const Network net = load_network(o, err);
  if (o.dataset.empty()) throw PreconditionError("--dataset is required for train");
  const fs::path dir = require_out(o);
  const LoadedDataset ds = load_dataset(o.dataset, net);
  const std::vector<ScenarioRecord> train = split_part(ds, true);
  const TrainConfig cfg = train_config(o, net, ds.manifest.layout);
  const TrainResult res = o.iters == 0 ? TrainResult{cfg.w_init, {}} : train_weights(net, train, cfg);
  save_weights(dir / "weights.json", net, ds.manifest.layout, res.weights);
  write_file_atomic(dir / "trace.csv", trace_to_csv(res.trace));
  if (res.trace.entries.empty()) {
    out << "iterations 0 (initial weights written)\n";
  } else {
    out << fmt::format("iterations {} first_loss {:.6g} last_loss {:.6g}\n",
                       res.trace.entries.size(), res.trace.entries.front().loss,
                       res.trace.entries.back().loss);
  }
}

void cmd_eval(const Options& o, std::ostream& out, std::ostream& err) {
  const Network net = load_network(o, err);
  if (o.dataset.empty()) throw PreconditionError("--dataset is required for eval");
  const fs::path dir = require_out(o);
  const LoadedDataset ds = load_dataset(o.dataset, net);
  const std::vector<ScenarioRecord> test = split_part(ds, false);
  EvalOptions eopts;
  eopts.wls = wls_options(o);
  eopts.threads = o.threads;
  const WeightVector w_init = default_initial_weights(ds.manifest.layout);
  std::optional<WeightVector> w_opt;
  if (o.weights != "init") w_opt = resolve_weights(o, net, ds.manifest.layout);
  EvalReport rep = evaluate(net, test, w_init, w_opt ? &*w_opt : nullptr, eopts);
  if (!o.curve.empty()) {
    const std::vector<std::size_t> counts = parse_counts(o.curve);
    Options init_opts = o;
    init_opts.weights = "init";
    const TrainConfig cfg = train_config(init_opts, net, ds.manifest.layout);
    rep.curve = scenario_curve(net, split_part(ds, true), test, counts, cfg, eopts);
    write_file_atomic(dir / "curve.csv", curve_to_csv(rep.curve));
  }
  write_file_atomic(dir / "report.json", report_to_json(rep));
  write_file_atomic(dir / "report.csv", report_to_csv(rep));
  write_file_atomic(dir / "scenarios.csv", scenario_rows_to_csv(rep));
  out << fmt::format("scenarios {} excluded {}\n", rep.scenarios, rep.excluded);
  for (const MethodSummary& m : rep.methods) {
    out << fmt::format("{:<10} loss {:.6g} failures {} mean_seconds {:.3g} max_violation {:.3g}\n",
                       m.name, m.loss, m.failures, m.mean_seconds, m.worst.max());
  }
  for (const CurvePoint& c : rep.curve) {
    out << fmt::format("curve {} {:.6g}\n", c.train_scenarios, c.test_loss);
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Restore AC power-flow solutions from relaxed or approximated OPF results",
               "pfrestore"};
  app.require_subcommand(1);
  const auto add_case = [&](CLI::App* sub) {
    sub->add_option("--case", o.case_path, "MATPOWER case file")->required()->check(CLI::ExistingFile);
  };
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
    sub->add_option("--tol", o.tol, "Solver tolerance")->check(CLI::PositiveNumber);
  };
  const auto add_lpac = [&](CLI::App* sub) {
    sub->add_option("--cos-tangents", o.lpac.cos_tangents, "Cosine envelope tangent cuts");
    sub->add_option("--circle-cuts", o.lpac.circle_cuts, "Sides of the flow-limit polygon");
    sub->add_option("--cost-segments", o.lpac.cost_segments, "Pieces of the cost epigraph");
  };

  CLI::App* parse = app.add_subcommand("parse", "Validate a case file and print a summary");
  add_case(parse);
  parse->add_option("--out", o.out, "Write the canonical case to DIR/case.m");

  CLI::App* pf = app.add_subcommand("pf", "Nominal Newton power flow");
  add_case(pf);
  add_common(pf);

  CLI::App* lpac = app.add_subcommand("lpac", "Solve the cold-start LPAC model at nominal load");
  add_case(lpac);
  add_common(lpac);
  add_lpac(lpac);
  lpac->add_option("--lp-file", o.lp_file, "Also export the LP in CPLEX LP format");

  CLI::App* scen = app.add_subcommand("scenarios", "Generate a scenario dataset");
  add_case(scen);
  add_common(scen);
  add_lpac(scen);
  scen->add_option("--count", o.count, "Number of load scenarios");
  scen->add_option("--sigma", o.sigma, "Std-dev of the load factor")->check(CLI::NonNegativeNumber);
  scen->add_option("--seed", o.seed, "Random seed");
  scen->add_option("--train-fraction", o.train_fraction, "Share of records in the training split")
      ->check(CLI::Range(0.0, 1.0));
  scen->add_option("--source", o.source, "lpac or synthetic");
  scen->add_option("--solutions", o.solutions,
                   "Directory of NNNNNN.json ground-truth solutions overriding the built-in rule");

  CLI::App* restore = app.add_subcommand("restore", "Restore solution files");
  add_case(restore);
  add_common(restore);
  restore->add_option("--solutions", o.solutions, "Solution file or directory")->required();
  restore->add_option("--method", o.method, "wls, benchmark or raw");
  restore->add_option("--weights", o.weights, "init or a weight file");

  CLI::App* train = app.add_subcommand("train", "Train measurement weights");
  add_case(train);
  add_common(train);
  train->add_option("--dataset", o.dataset, "Dataset directory")->required();
  train->add_option("--iters", o.iters, "Adam iterations")->check(CLI::NonNegativeNumber);
  train->add_option("--eta", o.eta, "Learning rate")->check(CLI::PositiveNumber);
  train->add_option("--seed", o.seed, "Mini-batch sampling seed");
  train->add_option("--batch", o.batch, "Mini-batch size (0 = full batch)");
  train->add_option("--weights", o.weights, "Initial weights: init or a weight file");

  CLI::App* eval = app.add_subcommand("eval", "Compare restoration methods on the test split");
  add_case(eval);
  add_common(eval);
  eval->add_option("--dataset", o.dataset, "Dataset directory")->required();
  eval->add_option("--weights", o.weights, "Trained weight file (init skips the trained method)");
  eval->add_option("--curve", o.curve, "Training-set sizes for the loss curve, e.g. 50,100,200");
  eval->add_option("--iters", o.iters, "Adam iterations per curve point");
  eval->add_option("--eta", o.eta, "Learning rate for curve training")->check(CLI::PositiveNumber);

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) return app.exit(e, out, err);
    err << "error[usage]: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*parse) cmd_parse(o, out, err);
    if (*pf) cmd_pf(o, out, err);
    if (*lpac) cmd_lpac(o, out, err);
    if (*scen) cmd_scenarios(o, out, err);
    if (*restore) cmd_restore(o, out, err);
    if (*train) cmd_train(o, out, err);
    if (*eval) cmd_eval(o, out, err);
  } catch (const Error& e) {
    err << "error[" << e.category() << "]: " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    err << "error[io]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error[internal]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace pfr
