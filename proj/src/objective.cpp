#include "smoothsr/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace smoothsr {

double fitness_r2(std::span<const double> predictions,
                  std::span<const double> targets) {
  if (predictions.size() != targets.size())
    throw std::invalid_argument("prediction/target size mismatch");
  const std::size_t m = predictions.size();
  if (m < 2) return 0.0;

  for (double p : predictions)
    if (!std::isfinite(p)) return 0.0;

  double mean_p = 0.0, mean_t = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    mean_p += predictions[i];
    mean_t += targets[i];
  }
  mean_p /= static_cast<double>(m);
  mean_t /= static_cast<double>(m);

  double cov = 0.0, var_p = 0.0, var_t = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double dp = predictions[i] - mean_p;
    const double dt = targets[i] - mean_t;
    cov += dp * dt;
    var_p += dp * dp;
    var_t += dt * dt;
  }
  if (var_p <= 0.0 || var_t <= 0.0) return 0.0;
  const double r = cov / std::sqrt(var_p * var_t);
  if (!std::isfinite(r)) return 0.0;
  return std::clamp(r * r, 0.0, 1.0);
}

double fitness_r2(const Genotype& g, const GenotypeLayout& layout,
                  const Dataset& data) {
  if (data.cols() != static_cast<std::size_t>(layout.config.num_vars))
    throw std::invalid_argument(
        "dataset column count does not match the tree's variable count");
  const auto preds = predict(g, layout, data.values, data.rows());
  return fitness_r2(preds, data.target);
}

double op_penalty(const Genotype& g, const GenotypeLayout& layout) {
  check_genotype(g, layout);
  if (layout.op_node_count == 0) return 0.0;
  const std::size_t k = layout.config.num_operators();
  if (k < 2) return 0.0;
  const double scale = 1.0 - 1.0 / static_cast<double>(k);
  std::vector<double> mix(k);
  double sum = 0.0;
  for (std::size_t node = 0; node < static_cast<std::size_t>(layout.op_node_count); ++node) {
    mix_weights({g.data() + layout.op_block(node), k - 1}, mix);
    const double top = *std::max_element(mix.begin(), mix.end());
    sum += (1.0 - top) / scale;
  }
  return sum / static_cast<double>(layout.op_node_count);
}

double var_penalty(const Genotype& g, const GenotypeLayout& layout,
                   std::size_t allowance) {
  check_genotype(g, layout);
  const std::size_t slots = layout.var_block_size();
  if (allowance == 0 || allowance > slots)
    throw std::invalid_argument("variable allowance must be in [1, n+1]");
  if (allowance == slots) return 0.0;  // every slot is permitted
  const double scale =
      1.0 - static_cast<double>(allowance) / static_cast<double>(slots);
  const std::size_t leaves = layout.config.leaf_count();
  std::vector<double> mags(slots);
  double sum = 0.0;
  for (std::size_t leaf = 0; leaf < leaves; ++leaf) {
    const double* beta = g.data() + layout.var_block(leaf);
    double mass = 0.0;
    for (std::size_t j = 0; j < slots; ++j) {
      mags[j] = std::fabs(beta[j]);
      mass += mags[j];
    }
    if (mass <= 0.0) continue;  // muted leaf is already decisive
    std::nth_element(mags.begin(), mags.begin() + (allowance - 1), mags.end(),
                     std::greater<double>());
    double top = 0.0;
    for (std::size_t j = 0; j < allowance; ++j) top += mags[j];
    sum += (1.0 - top / mass) / scale;
  }
  return sum / static_cast<double>(leaves);
}

void PenaltyConfig::validate(const GenotypeLayout& layout) const {
  if (lambda_op < 0.0 || lambda_var < 0.0)
    throw std::invalid_argument("penalty weights must be non-negative");
  if (var_allowance == 0 || var_allowance > layout.var_block_size())
    throw std::invalid_argument("variable allowance must be in [1, n+1]");
  std::uint64_t prev = 0;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const auto& e = schedule[i];
    if (e.lambda_op < 0.0 || e.lambda_var < 0.0)
      throw std::invalid_argument("schedule weights must be non-negative");
    if (i > 0 && e.start_evaluation <= prev)
      throw std::invalid_argument(
          "schedule entries must have strictly increasing start evaluations");
    prev = e.start_evaluation;
  }
  if (!schedule.empty() && schedule.front().start_evaluation != 0)
    throw std::invalid_argument("first schedule entry must start at 0");
}

ScheduleEntry PenaltyConfig::lambdas_at(std::uint64_t evaluation) const {
  if (schedule.empty()) return {0, lambda_op, lambda_var};
  // Entries are sorted by start; pick the last one at or before `evaluation`.
  const ScheduleEntry* active = &schedule.front();
  for (const auto& e : schedule) {
    if (e.start_evaluation <= evaluation) active = &e;
    else break;
  }
  return *active;
}

ObjectiveReport objective(const Genotype& g, const GenotypeLayout& layout,
                          const Dataset& data, const PenaltyConfig& penalty,
                          std::uint64_t evaluation) {
  ObjectiveReport rep;
  const auto lambdas = penalty.lambdas_at(evaluation);
  rep.lambda_op = lambdas.lambda_op;
  rep.lambda_var = lambdas.lambda_var;

  const auto preds = predict(g, layout, data.values, data.rows());
  rep.r2 = fitness_r2(preds, data.target);
  rep.fitness_term = 1.0 - rep.r2;
  rep.op_penalty = op_penalty(g, layout);
  rep.var_penalty = var_penalty(g, layout, penalty.var_allowance);
  rep.total = rep.fitness_term + rep.lambda_op * rep.op_penalty +
              rep.lambda_var * rep.var_penalty;
  return rep;
}

void SmoothProblem::validate() const {
  layout.config.validate();
  data.validate();
  if (data.cols() != static_cast<std::size_t>(layout.config.num_vars))
    throw std::invalid_argument(
        "dataset column count does not match the tree's variable count");
  penalty.validate(layout);
  if (!(decode_threshold >= 0.0 && decode_threshold < 1.0))
    throw std::invalid_argument("decode threshold must be in [0, 1)");
}

ObjectiveReport SmoothProblem::evaluate(const Genotype& g,
                                        std::uint64_t evaluation) const {
  return objective(g, layout, data, penalty, evaluation);
}

}  // namespace smoothsr
