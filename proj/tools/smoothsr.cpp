#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "smoothsr/dataset.hpp"
#include "smoothsr/experiment.hpp"
#include "smoothsr/fla.hpp"
#include "smoothsr/parallel.hpp"
#include "smoothsr/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace smoothsr;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_fresh_file(const std::string& path, bool force) {
  if (!force && fs::exists(path))
    throw ValidationError("output '" + path +
                          "' already exists (pass --force to overwrite)");
}

void require_fresh_dir(const std::string& path, bool force) {
  if (!force && fs::exists(path))
    throw ValidationError("output directory '" + path +
                          "' already exists (pass --force to overwrite)");
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot write file: " + path.string());
  return out;
}

void write_manifest(const fs::path& path, json doc) {
  doc["version"] = kVersion;
  doc["created"] = iso_timestamp();
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
}

json optimizer_manifest(const ExperimentConfig& cfg, std::size_t dimension) {
  json doc;
  doc["algorithm"] = algorithm_name(cfg.algorithm);
  doc["population"] = cfg.population;
  doc["sigma0"] = cfg.sigma0;
  doc["max_evaluations"] = cfg.max_evaluations;
  if (cfg.target_value) doc["target_value"] = *cfg.target_value;
  else doc["target_value"] = nullptr;
  doc["seed"] = cfg.seed;
  if (cfg.algorithm == Algorithm::cmaes) {
    OptimizerConfig oc;
    oc.dimension = dimension;
    oc.population = cfg.population;
    const auto par = cmaes_parameters(dimension, oc.effective_population());
    json p;
    p["lambda"] = par.lambda;
    p["mu"] = par.mu;
    p["weights"] = par.weights;
    p["mu_eff"] = par.mu_eff;
    p["c_sigma"] = par.c_sigma;
    p["d_sigma"] = par.d_sigma;
    p["c_c"] = par.c_c;
    p["c_1"] = par.c_1;
    p["c_mu"] = par.c_mu;
    p["chi_n"] = par.chi_n;
    doc["parameters"] = p;
  }
  return doc;
}

json problem_manifest(const ProblemDocument& doc) {
  const TreeConfig& tc = doc.problem.layout.config;
  json out;
  out["depth"] = tc.depth;
  out["num_vars"] = tc.num_vars;
  json ops = json::array();
  for (Op op : tc.operators) ops.push_back(op_name(op));
  out["operators"] = ops;
  out["leaf_mode"] = tc.leaf_mode == LeafMode::op_fold ? "op_fold" : "linear";
  const PenaltyConfig& pc = doc.problem.penalty;
  out["penalty"]["lambda_op"] = pc.lambda_op;
  out["penalty"]["lambda_var"] = pc.lambda_var;
  out["penalty"]["var_allowance"] = pc.var_allowance;
  json sched = json::array();
  for (const auto& e : pc.schedule) {
    json entry;
    entry["start_evaluation"] = e.start_evaluation;
    entry["lambda_op"] = e.lambda_op;
    entry["lambda_var"] = e.lambda_var;
    sched.push_back(entry);
  }
  out["penalty"]["schedule"] = sched;
  out["decode_threshold"] = doc.problem.decode_threshold;
  out["seed"] = doc.problem.seed;
  out["dimension"] = doc.problem.layout.total_dim;
  return out;
}

struct GenDataArgs {
  std::string problem = "poly10";
  std::size_t rows = 500;
  std::uint64_t seed = 1;
  std::string range = "-1:1";
  std::string out;
  bool force = false;
};

int cmd_gen_data(const GenDataArgs& args) {
  require_fresh_file(args.out, args.force);
  Dataset data;
  json manifest;
  manifest["command"] = "gen-data";
  if (args.problem == "poly10") {
    const std::size_t colon = args.range.find(':');
    if (colon == std::string::npos)
      throw ValidationError("--range must look like lo:hi");
    double lo = 0.0, hi = 0.0;
    try {
      lo = std::stod(args.range.substr(0, colon));
      hi = std::stod(args.range.substr(colon + 1));
    } catch (const std::exception&) {
      throw ValidationError("--range must contain two numbers");
    }
    data = gen_poly10(args.rows, args.seed, lo, hi);
    manifest["problem"] = "poly10";
    manifest["rows"] = args.rows;
    manifest["seed"] = args.seed;
    manifest["range"] = {{"lo", lo}, {"hi", hi}};
  } else {
    // Treat the argument as an existing CSV: validate and re-emit in
    // canonical form so downstream hashes are stable.
    data = load_dataset_csv(args.problem);
    manifest["problem"] = "csv";
    manifest["source"] = args.problem;
    manifest["source_hash"] = hash_file(args.problem);
  }
  save_dataset_csv(data, args.out);
  manifest["output"] = args.out;
  manifest["output_hash"] = hash_file(args.out);
  manifest["rows_written"] = data.rows();
  manifest["columns"] = data.cols() + 1;
  write_manifest(args.out + ".manifest.json", std::move(manifest));
  return kExitOk;
}

struct OptimizeArgs {
  std::string config;
  std::string data;
  std::string opt;
  std::string out;
  std::optional<std::uint64_t> max_evals;
  std::optional<std::uint64_t> seed;
  bool eval_trace = false;
  int threads = 0;
  bool force = false;
};

int cmd_optimize(const OptimizeArgs& args) {
  ProblemDocument doc = load_problem_json(args.config);
  const std::string data_path = !args.data.empty() ? args.data : doc.data_path;
  if (data_path.empty())
    throw ValidationError(
        "no dataset: pass --data or set \"data\" in the problem config");
  attach_dataset(doc, load_dataset_csv(data_path));

  ExperimentConfig cfg =
      args.opt.empty() ? ExperimentConfig{} : load_optimizer_json(args.opt);
  if (args.max_evals) cfg.max_evaluations = *args.max_evals;
  if (args.seed) cfg.seed = *args.seed;
  cfg.threads = args.threads;

  require_fresh_dir(args.out, args.force);
  fs::create_directories(args.out);
  const fs::path out_dir(args.out);

  EvalTrace evals;
  RunTrace trace =
      run_experiment(doc.problem, cfg, args.eval_trace ? &evals : nullptr);

  {
    auto out = open_out(out_dir / "trace.csv");
    write_trace_csv(trace, out);
  }
  {
    auto out = open_out(out_dir / "genotype.json");
    write_genotype_json(trace.best, doc.problem.layout, out);
  }
  {
    auto out = open_out(out_dir / "formula.txt");
    out << trace.formula << '\n';
  }
  if (args.eval_trace) {
    auto out = open_out(out_dir / "eval_trace.csv");
    write_eval_trace_csv(evals, out);
  }

  json manifest;
  manifest["command"] = "optimize";
  manifest["threads"] = resolve_threads(args.threads);
  manifest["problem"] = problem_manifest(doc);
  manifest["optimizer"] = optimizer_manifest(cfg, doc.problem.layout.total_dim);
  manifest["inputs"][args.config] = hash_file(args.config);
  manifest["inputs"][data_path] = hash_file(data_path);
  if (!args.opt.empty()) manifest["inputs"][args.opt] = hash_file(args.opt);
  json result;
  result["status"] = trace.status == RunStatus::completed ? "completed"
                     : trace.status == RunStatus::target_reached
                         ? "target_reached"
                         : "aborted_numerical";
  if (!trace.message.empty()) result["message"] = trace.message;
  result["evaluations"] = trace.evaluations;
  result["best_total"] = trace.best_total;
  result["best_r2"] = trace.best_components.r2;
  result["formula"] = trace.formula;
  manifest["result"] = result;
  write_manifest(out_dir / "manifest.json", std::move(manifest));

  if (trace.status == RunStatus::aborted_numerical) {
    std::cerr << "smoothsr: run aborted: " << trace.message << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

struct FlaArgs {
  std::string config;
  std::string data;
  std::string manipulators = "poly-1-15,poly-all-15,poly-1-2,poly-all-2,uni-1";
  std::uint64_t walk_length = 10000;
  std::size_t reps = 100;
  std::size_t neighbors = 100;
  std::uint64_t max_steps = 1000;
  double epsilon = 0.0;
  double lambda_op = 0.1;
  double lambda_var = 0.1;
  std::uint64_t seed = 1;
  std::string out;
  bool keep_traces = false;
  int threads = 0;
  bool force = false;
};

std::vector<Manipulator> parse_manipulator_list(const std::string& text) {
  std::vector<Manipulator> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t pos = text.find(',', start);
    const std::string item =
        text.substr(start, pos == std::string::npos ? pos : pos - start);
    if (!item.empty()) out.push_back(parse_manipulator(item));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  if (out.empty()) throw ValidationError("empty manipulator list");
  return out;
}

int cmd_fla(const FlaArgs& args) {
  ProblemDocument doc = load_problem_json(args.config);
  const std::string data_path = !args.data.empty() ? args.data : doc.data_path;
  if (data_path.empty())
    throw ValidationError(
        "no dataset: pass --data or set \"data\" in the problem config");
  attach_dataset(doc, load_dataset_csv(data_path));

  const std::vector<Manipulator> manips =
      parse_manipulator_list(args.manipulators);

  BatteryConfig cfg;
  cfg.walk_length = args.walk_length;
  cfg.repetitions = args.reps;
  cfg.neighbors_per_step = args.neighbors;
  cfg.max_steps = args.max_steps;
  cfg.epsilon = args.epsilon;
  cfg.lambda_op = args.lambda_op;
  cfg.lambda_var = args.lambda_var;
  cfg.seed = args.seed;
  cfg.threads = args.threads;
  cfg.validate();

  require_fresh_dir(args.out, args.force);
  fs::create_directories(args.out);
  const fs::path out_dir(args.out);

  TraceSink sink;
  if (args.keep_traces) {
    fs::create_directories(out_dir / "walks");
    sink = [&](std::size_t mi, std::size_t wi, const WalkTrace& walk) {
      const fs::path dir = out_dir / "walks" / manips[mi].name();
      fs::create_directories(dir);
      std::string name;
      if (wi == 0) name = "random.csv";
      else if (wi <= cfg.repetitions)
        name = "up-" + std::to_string(wi) + ".csv";
      else
        name = "down-" + std::to_string(wi - cfg.repetitions) + ".csv";
      auto out = open_out(dir / name);
      out << "step,total\n";
      for (std::size_t t = 0; t < walk.fitness.size(); ++t)
        out << t << ',' << format_double(walk.fitness[t]) << '\n';
    };
  }

  const auto reports = fla_battery(doc.problem, manips, cfg, sink);
  {
    auto out = open_out(out_dir / "report.csv");
    write_fla_csv(reports, out);
  }

  json manifest;
  manifest["command"] = "fla";
  manifest["threads"] = resolve_threads(args.threads);
  manifest["problem"] = problem_manifest(doc);
  json battery;
  battery["walk_length"] = cfg.walk_length;
  battery["repetitions"] = cfg.repetitions;
  battery["neighbors_per_step"] = cfg.neighbors_per_step;
  battery["max_steps"] = cfg.max_steps;
  battery["epsilon"] = cfg.epsilon;
  battery["lambda_op"] = cfg.lambda_op;
  battery["lambda_var"] = cfg.lambda_var;
  battery["seed"] = cfg.seed;
  manifest["battery"] = battery;
  json names = json::array();
  for (const auto& m : manips) names.push_back(m.name());
  manifest["manipulators"] = names;
  manifest["inputs"][args.config] = hash_file(args.config);
  manifest["inputs"][data_path] = hash_file(data_path);
  write_manifest(out_dir / "manifest.json", std::move(manifest));
  return kExitOk;
}

struct DecodeArgs {
  std::string genotype;
  double threshold = 0.05;
};

int cmd_decode(const DecodeArgs& args) {
  if (!(args.threshold > 0.0 && args.threshold < 1.0))
    throw ValidationError("--threshold must lie in (0, 1)");
  const GenotypeDocument doc = load_genotype_json(args.genotype);
  const CrispTree tree = decode(doc.values, doc.layout, args.threshold);
  std::cout << tree.render() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Smooth symbolic regression toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand(
      "gen-data", "Generate or canonicalize a regression dataset CSV");
  gen_cmd->add_option("--problem", gen.problem,
                      "'poly10' or a path to an existing CSV");
  gen_cmd->add_option("--rows", gen.rows, "Sample count (poly10)");
  gen_cmd->add_option("--seed", gen.seed, "RNG seed (poly10)");
  gen_cmd->add_option("--range", gen.range, "Input range lo:hi (poly10)");
  gen_cmd->add_option("--out", gen.out, "Output CSV path")->required();
  gen_cmd->add_flag("--force", gen.force, "Overwrite existing output");

  OptimizeArgs opt;
  auto* opt_cmd = app.add_subcommand(
      "optimize", "Run the continuous optimizer on a regression problem");
  opt_cmd->add_option("--config", opt.config, "Problem config JSON")
      ->required();
  opt_cmd->add_option("--data", opt.data, "Dataset CSV");
  opt_cmd->add_option("--opt", opt.opt, "Optimizer config JSON");
  opt_cmd->add_option("--out", opt.out, "Output directory")->required();
  std::uint64_t opt_max_evals = 0;
  auto* max_evals_flag = opt_cmd->add_option(
      "--max-evals", opt_max_evals, "Override max evaluations");
  std::uint64_t opt_seed = 0;
  auto* seed_flag =
      opt_cmd->add_option("--seed", opt_seed, "Override optimizer seed");
  opt_cmd->add_flag("--eval-trace", opt.eval_trace,
                    "Also write per-evaluation trace CSV");
  opt_cmd->add_option("--threads", opt.threads,
                      "Worker threads (0 = machine default)");
  opt_cmd->add_flag("--force", opt.force, "Overwrite existing output");

  FlaArgs fla;
  auto* fla_cmd = app.add_subcommand(
      "fla", "Run the fitness-landscape-analysis battery");
  fla_cmd->add_option("--config", fla.config, "Problem config JSON")
      ->required();
  fla_cmd->add_option("--data", fla.data, "Dataset CSV");
  fla_cmd->add_option("--manipulators", fla.manipulators,
                      "Comma-separated manipulator names");
  fla_cmd->add_option("--walk-length", fla.walk_length, "Random walk steps");
  fla_cmd->add_option("--reps", fla.reps, "Adaptive walks per direction");
  fla_cmd->add_option("--neighbors", fla.neighbors,
                      "Neighbors per adaptive-walk step");
  fla_cmd->add_option("--max-steps", fla.max_steps, "Adaptive walk step cap");
  fla_cmd->add_option("--epsilon", fla.epsilon,
                      "Information-analysis sensitivity");
  fla_cmd->add_option("--lambda-op", fla.lambda_op,
                      "Fixed operator penalty weight");
  fla_cmd->add_option("--lambda-var", fla.lambda_var,
                      "Fixed variable penalty weight");
  fla_cmd->add_option("--seed", fla.seed, "Battery base seed");
  fla_cmd->add_option("--out", fla.out, "Output directory")->required();
  fla_cmd->add_flag("--keep-traces", fla.keep_traces,
                    "Write every walk's fitness trace");
  fla_cmd->add_option("--threads", fla.threads,
                      "Worker threads (0 = machine default)");
  fla_cmd->add_flag("--force", fla.force, "Overwrite existing output");

  DecodeArgs dec;
  auto* dec_cmd = app.add_subcommand(
      "decode", "Print the crisp formula for a genotype file");
  dec_cmd->add_option("--genotype", dec.genotype, "Genotype JSON file")
      ->required();
  dec_cmd->add_option("--threshold", dec.threshold,
                      "Leaf variable share threshold in (0, 1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (max_evals_flag->count() > 0) opt.max_evals = opt_max_evals;
    if (seed_flag->count() > 0) opt.seed = opt_seed;
    if (gen_cmd->parsed()) return cmd_gen_data(gen);
    if (opt_cmd->parsed()) return cmd_optimize(opt);
    if (fla_cmd->parsed()) return cmd_fla(fla);
    if (dec_cmd->parsed()) return cmd_decode(dec);
    std::cerr << "smoothsr: no subcommand given\n";
    return kExitValidation;
  } catch (const ValidationError& e) {
    std::cerr << "smoothsr: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "smoothsr: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "smoothsr: " << e.what() << "\n";
    return kExitRuntime;
  }
}
