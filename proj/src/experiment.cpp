#include "smoothsr/experiment.hpp"

#include <atomic>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "smoothsr/dataset.hpp"

namespace smoothsr {

namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json parse_json(const std::string& text, const char* what) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded())
    throw std::invalid_argument(std::string("malformed JSON in ") + what);
  return doc;
}

}  // namespace

ProblemDocument parse_problem_json(const std::string& text) {
  const json doc = parse_json(text, "problem config");
  ProblemDocument out;
  TreeConfig& tc = out.problem.layout.config;

  tc.depth = doc.value("depth", 5);
  if (doc.contains("num_vars")) {
    out.declared_num_vars = doc.at("num_vars").get<std::size_t>();
    tc.num_vars = *out.declared_num_vars;
  }
  if (doc.contains("operators")) {
    tc.operators.clear();
    for (const auto& name : doc.at("operators"))
      tc.operators.push_back(parse_op(name.get<std::string>()));
  }
  if (doc.contains("leaf_mode")) {
    const std::string mode = doc.at("leaf_mode").get<std::string>();
    if (mode == "op_fold") tc.leaf_mode = LeafMode::op_fold;
    else if (mode == "linear") tc.leaf_mode = LeafMode::linear;
    else throw std::invalid_argument("leaf_mode must be op_fold or linear");
  }

  PenaltyConfig& pc = out.problem.penalty;
  if (doc.contains("penalty")) {
    const json& p = doc.at("penalty");
    pc.lambda_op = p.value("lambda_op", 0.0);
    pc.lambda_var = p.value("lambda_var", 0.0);
    pc.var_allowance = p.value("var_allowance", std::size_t{2});
    if (p.contains("schedule")) {
      for (const auto& e : p.at("schedule")) {
        ScheduleEntry entry;
        entry.start_evaluation = e.at("start_evaluation").get<std::uint64_t>();
        entry.lambda_op = e.at("lambda_op").get<double>();
        entry.lambda_var = e.at("lambda_var").get<double>();
        pc.schedule.push_back(entry);
      }
    }
  }

  out.problem.decode_threshold = doc.value("decode_threshold", 0.05);
  out.problem.seed = doc.value("seed", std::uint64_t{1});
  out.data_path = doc.value("data", std::string());
  out.raw_json = doc.dump();
  out.problem.layout = build_layout(tc);  // validates the tree config early
  return out;
}

void attach_dataset(ProblemDocument& doc, Dataset data) {
  data.validate();
  TreeConfig tc = doc.problem.layout.config;
  if (!doc.declared_num_vars) tc.num_vars = data.cols();
  doc.problem.layout = build_layout(tc);
  doc.problem.data = std::move(data);
  doc.problem.validate();
}

ProblemDocument load_problem_json(const std::string& path) {
  return parse_problem_json(read_file(path));
}

ExperimentConfig parse_optimizer_json(const std::string& text) {
  const json doc = parse_json(text, "optimizer config");
  ExperimentConfig cfg;
  if (doc.contains("algorithm")) {
    const std::string a = doc.at("algorithm").get<std::string>();
    if (a == "cmaes") cfg.algorithm = Algorithm::cmaes;
    else if (a == "one-plus-one") cfg.algorithm = Algorithm::one_plus_one;
    else throw std::invalid_argument("algorithm must be cmaes or one-plus-one");
  }
  cfg.population = doc.value("population", std::size_t{0});
  cfg.sigma0 = doc.value("sigma0", 0.5);
  cfg.max_evaluations = doc.value("max_evaluations", std::uint64_t{10000});
  if (doc.contains("target_value") && !doc.at("target_value").is_null())
    cfg.target_value = doc.at("target_value").get<double>();
  cfg.seed = doc.value("seed", std::uint64_t{1});
  return cfg;
}

ExperimentConfig load_optimizer_json(const std::string& path) {
  return parse_optimizer_json(read_file(path));
}

std::string algorithm_name(Algorithm a) {
  return a == Algorithm::cmaes ? "cmaes" : "one-plus-one";
}

RunTrace run_experiment(const SmoothProblem& problem,
                        const ExperimentConfig& config,
                        EvalTrace* eval_trace) {
  problem.validate();

  OptimizerConfig oc;
  oc.dimension = problem.layout.total_dim;
  oc.population = config.population;
  oc.sigma0 = config.sigma0;
  oc.max_evaluations = config.max_evaluations;
  oc.target_value = config.target_value;
  oc.seed = config.seed;
  oc.threads = config.threads;
  for (const auto& entry : problem.penalty.schedule)
    if (entry.start_evaluation > 0)
      oc.schedule_boundaries.push_back(entry.start_evaluation);

  oc.component_fn = [&problem](std::span<const double> x) {
    const Genotype g(x.begin(), x.end());
    const ObjectiveReport rep = problem.evaluate(g, 0);
    return TraceComponents{rep.r2, rep.op_penalty, rep.var_penalty};
  };

  // Slots for per-evaluation reports; indices are unique per call, so
  // concurrent population evaluations write disjoint entries.
  std::vector<ObjectiveReport> slots;
  std::vector<std::atomic<bool>> filled;
  if (eval_trace) {
    const std::size_t cap =
        config.max_evaluations + problem.penalty.schedule.size() + 4;
    slots.resize(cap);
    filled = std::vector<std::atomic<bool>>(cap);
  }

  const ObjectiveFn f = [&](std::span<const double> x, std::uint64_t eval) {
    const Genotype g(x.begin(), x.end());
    const ObjectiveReport rep = problem.evaluate(g, eval);
    if (eval_trace && eval < slots.size()) {
      slots[eval] = rep;
      filled[eval].store(true, std::memory_order_release);
    }
    return rep.total;
  };

  RunTrace trace = config.algorithm == Algorithm::cmaes
                       ? cmaes_minimize(f, oc)
                       : one_plus_one_minimize(f, oc);

  if (eval_trace) {
    eval_trace->rows.clear();
    for (std::size_t e = 0; e < slots.size(); ++e) {
      if (!filled[e].load(std::memory_order_acquire)) break;
      eval_trace->rows.push_back(slots[e]);
    }
  }

  if (!trace.best.empty()) {
    const CrispTree tree =
        decode(trace.best, problem.layout, problem.decode_threshold);
    trace.formula = tree.render();
  }
  return trace;
}

void write_trace_csv(const RunTrace& trace, std::ostream& out) {
  out << "generation,evaluations,best_total,best_r2,op_penalty,var_penalty,"
         "sigma\n";
  for (const auto& r : trace.rows) {
    out << r.generation << ',' << r.evaluations << ','
        << format_double(r.best_total) << ',' << format_double(r.best_r2)
        << ',' << format_double(r.op_penalty) << ','
        << format_double(r.var_penalty) << ',' << format_double(r.sigma)
        << '\n';
  }
}

void write_eval_trace_csv(const EvalTrace& trace, std::ostream& out) {
  out << "eval,total,fitness_term,r2,op_penalty,var_penalty\n";
  for (std::size_t e = 0; e < trace.rows.size(); ++e) {
    const auto& r = trace.rows[e];
    out << e << ',' << format_double(r.total) << ','
        << format_double(r.fitness_term) << ',' << format_double(r.r2) << ','
        << format_double(r.op_penalty) << ',' << format_double(r.var_penalty)
        << '\n';
  }
}

void write_genotype_json(const Genotype& g, const GenotypeLayout& layout,
                         std::ostream& out) {
  check_genotype(g, layout);
  json doc;
  doc["layout"]["depth"] = layout.config.depth;
  doc["layout"]["num_vars"] = layout.config.num_vars;
  json ops = json::array();
  for (Op op : layout.config.operators) ops.push_back(op_name(op));
  doc["layout"]["operators"] = ops;
  doc["layout"]["leaf_mode"] =
      layout.config.leaf_mode == LeafMode::op_fold ? "op_fold" : "linear";
  doc["layout"]["op_weight_count"] = layout.op_weight_count;
  doc["layout"]["var_weight_count"] = layout.var_weight_count;
  doc["layout"]["total_dim"] = layout.total_dim;
  doc["values"] = g;
  out << doc.dump(2) << '\n';
}

GenotypeDocument parse_genotype_json(const std::string& text) {
  const json doc = parse_json(text, "genotype file");
  GenotypeDocument out;
  const json& lay = doc.at("layout");
  TreeConfig tc;
  tc.depth = lay.at("depth").get<std::size_t>();
  tc.num_vars = lay.at("num_vars").get<std::size_t>();
  tc.operators.clear();
  for (const auto& name : lay.at("operators"))
    tc.operators.push_back(parse_op(name.get<std::string>()));
  const std::string mode = lay.at("leaf_mode").get<std::string>();
  if (mode == "op_fold") tc.leaf_mode = LeafMode::op_fold;
  else if (mode == "linear") tc.leaf_mode = LeafMode::linear;
  else throw std::invalid_argument("leaf_mode must be op_fold or linear");
  out.layout = build_layout(tc);
  out.values = doc.at("values").get<std::vector<double>>();
  check_genotype(out.values, out.layout);
  return out;
}

GenotypeDocument load_genotype_json(const std::string& path) {
  return parse_genotype_json(read_file(path));
}

std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open file for hashing: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string("fnv1a64:") + hex;
}

std::string iso_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace smoothsr
