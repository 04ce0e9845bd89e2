#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "smoothsr/dataset.hpp"
#include "smoothsr/encoding.hpp"

namespace smoothsr {

// R^2 between predictions and targets, clamped to [0,1] downstream via the
// fitness term 1-R^2.  Degenerate cases (non-finite predictions, zero
// variance on either side) yield 0.
double fitness_r2(std::span<const double> predictions,
                  std::span<const double> targets);
double fitness_r2(const Genotype& g, const GenotypeLayout& layout,
                  const Dataset& data);

// Mean over operator-carrying nodes of (1 - max_i w_hat_i) / (1 - 1/k).
// 0 when every node is one-hot, 1 when every node is uniform.
double op_penalty(const Genotype& g, const GenotypeLayout& layout);

// Mean over leaves of (1 - mass of top `allowance` normalized |beta|) scaled
// by 1/(1 - allowance/(n+1)).  Leaves with all-zero coefficients contribute 0.
double var_penalty(const Genotype& g, const GenotypeLayout& layout,
                   std::size_t allowance);

/// One phase of the staged penalty schedule: from `start_evaluation` onward
// the given lambdas apply, until a later entry takes over.
struct ScheduleEntry {
  std::uint64_t start_evaluation = 0;
  double lambda_op = 0.0;
  double lambda_var = 0.0;
};

struct PenaltyConfig {
  double lambda_op = 0.0;
  double lambda_var = 0.0;
  std::size_t var_allowance = 2;
  std::vector<ScheduleEntry> schedule;  // optional; overrides flat lambdas

  void validate(const GenotypeLayout& layout) const;
  // Effective (lambda_op, lambda_var) at a given evaluation index.
  ScheduleEntry lambdas_at(std::uint64_t evaluation) const;
};

struct ObjectiveReport {
  double total = 0.0;
  double fitness_term = 0.0;  // 1 - R^2
  double r2 = 0.0;
  double op_penalty = 0.0;
  double var_penalty = 0.0;
  double lambda_op = 0.0;
  double lambda_var = 0.0;
};

// total = (1 - R^2) + lambda_op * p_op + lambda_var * p_var
ObjectiveReport objective(const Genotype& g, const GenotypeLayout& layout,
                          const Dataset& data, const PenaltyConfig& penalty,
                          std::uint64_t evaluation);

// Bundles everything needed to score genotypes against one dataset.
struct SmoothProblem {
  GenotypeLayout layout;
  Dataset data;
  PenaltyConfig penalty;
  double decode_threshold = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
  ObjectiveReport evaluate(const Genotype& g, std::uint64_t evaluation) const;
};

}  // namespace smoothsr
