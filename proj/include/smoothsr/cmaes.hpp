#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace smoothsr {

/// Objective: x and the global evaluation index (drives penalty schedules).
// Must be safe for concurrent calls with distinct indices.
using ObjectiveFn =
    std::function<double(std::span<const double>, std::uint64_t)>;

// Optional probe that splits the tracked best into reporting components.
struct TraceComponents {
  double r2 = 0.0;
  double op_penalty = 0.0;
  double var_penalty = 0.0;
};
using ComponentFn = std::function<TraceComponents(std::span<const double>)>;

struct OptimizerConfig {
  std::size_t dimension = 0;
  std::size_t population = 0;  // 0 -> 4 + floor(3 ln N)
  std::vector<double> initial_mean;  // empty -> zero vector
  double sigma0 = 0.5;
  std::uint64_t max_evaluations = 10000;
  std::optional<double> target_value;
  std::uint64_t seed = 1;
  int threads = 1;  // 0 -> resolve_threads default
  // Evaluation indices at which the objective's penalty weights change; the
  // tracked best is re-scored when crossing one so elitism stays meaningful.
  std::vector<std::uint64_t> schedule_boundaries;
  ComponentFn component_fn;  // optional; fills r2/op/var trace columns

  void validate() const;
  std::size_t effective_population() const;
};

enum class RunStatus { completed, target_reached, aborted_numerical };

struct TraceRow {
  std::uint64_t generation = 0;
  std::uint64_t evaluations = 0;
  double best_total = 0.0;
  double best_r2 = 0.0;
  double op_penalty = 0.0;
  double var_penalty = 0.0;
  double sigma = 0.0;
};

struct RunTrace {
  std::vector<TraceRow> rows;
  std::vector<double> best;
  double best_total = 0.0;
  TraceComponents best_components;
  RunStatus status = RunStatus::completed;
  std::string message;
  std::uint64_t evaluations = 0;
  std::string formula;  // filled by the experiment layer, not the optimizer
};

// Resolved strategy constants (Hansen's defaults), echoed into manifests.
struct CmaesParameters {
  std::size_t lambda = 0;
  std::size_t mu = 0;
  std::vector<double> weights;
  double mu_eff = 0.0;
  double c_sigma = 0.0;
  double d_sigma = 0.0;
  double c_c = 0.0;
  double c_1 = 0.0;
  double c_mu = 0.0;
  double chi_n = 0.0;
};
CmaesParameters cmaes_parameters(std::size_t dimension, std::size_t lambda);

// (mu/mu_w, lambda)-CMA-ES with cumulative step-size adaptation and rank-1 +
// rank-mu covariance updates.  Deterministic given the seed, including across
// thread counts (candidates are sampled sequentially, evaluated in parallel,
// and merged in sample order).  Non-finite objective values rank worst;
// unrecoverable covariance breakdown aborts with the trace collected so far.
RunTrace cmaes_minimize(const ObjectiveFn& f, const OptimizerConfig& config);

// (1+1)-ES with the 1/5th success rule; cheap baseline for tests.
RunTrace one_plus_one_minimize(const ObjectiveFn& f,
                               const OptimizerConfig& config);

}  // namespace smoothsr
