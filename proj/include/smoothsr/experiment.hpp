#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "smoothsr/cmaes.hpp"
#include "smoothsr/objective.hpp"

namespace smoothsr {

enum class Algorithm { cmaes, one_plus_one };

struct ExperimentConfig {
  Algorithm algorithm = Algorithm::cmaes;
  std::size_t population = 0;  // 0 -> CMA-ES default
  double sigma0 = 0.5;
  std::uint64_t max_evaluations = 10000;
  std::optional<double> target_value;
  std::uint64_t seed = 1;
  int threads = 1;
};

// Parses the problem document: tree shape, operators, penalty weights and
// schedule, decode threshold, seed, optional "data" path (returned so the
// caller can load it).  The dataset itself is attached by the caller.
struct ProblemDocument {
  SmoothProblem problem;  // data left empty
  std::optional<std::size_t> declared_num_vars;
  std::string data_path;  // empty when absent
  std::string raw_json;   // compact echo for manifests
};
ProblemDocument parse_problem_json(const std::string& text);
ProblemDocument load_problem_json(const std::string& path);

// Moves the dataset into the problem, inferring num_vars from the data when
// the document leaves it undeclared, and re-derives the genotype layout.
// Throws on column/num_vars mismatch before any evaluation happens.
void attach_dataset(ProblemDocument& doc, Dataset data);

ExperimentConfig parse_optimizer_json(const std::string& text);
ExperimentConfig load_optimizer_json(const std::string& path);

// Per-evaluation objective reports in evaluation order (optional tracing).
struct EvalTrace {
  std::vector<ObjectiveReport> rows;  // index = evaluation
};

// Wires the scheduled objective to the optimizer: zero initial mean, penalty
// phases as schedule boundaries, component probe for trace columns, decoded
// formula attached to the returned trace.
RunTrace run_experiment(const SmoothProblem& problem,
                        const ExperimentConfig& config,
                        EvalTrace* eval_trace = nullptr);

// Artifact writers (deterministic byte-for-byte except the manifest's
// timestamp field).
void write_trace_csv(const RunTrace& trace, std::ostream& out);
void write_genotype_json(const Genotype& g, const GenotypeLayout& layout,
                         std::ostream& out);
void write_eval_trace_csv(const EvalTrace& trace, std::ostream& out);

// Reads a genotype document back: layout echo + flat values.
struct GenotypeDocument {
  GenotypeLayout layout;
  Genotype values;
};
GenotypeDocument parse_genotype_json(const std::string& text);
GenotypeDocument load_genotype_json(const std::string& path);

// FNV-1a 64-bit over a file's bytes, rendered as "fnv1a64:<16 hex digits>".
std::string hash_file(const std::string& path);

// UTC timestamp, ISO-8601 seconds resolution.
std::string iso_timestamp();

std::string algorithm_name(Algorithm a);

}  // namespace smoothsr
