#include "smoothsr/cmaes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

#include "smoothsr/parallel.hpp"
#include "smoothsr/rng.hpp"

namespace smoothsr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double rank_key(double f) { return std::isfinite(f) ? f : kInf; }

// Number of schedule boundaries at or before the given evaluation index.
std::size_t phase_of(const std::vector<std::uint64_t>& boundaries,
                     std::uint64_t evaluation) {
  std::size_t p = 0;
  for (auto b : boundaries)
    if (b <= evaluation) ++p;
  return p;
}

struct BestTracker {
  std::vector<double> x;
  double total = kInf;
  TraceComponents components;
  std::size_t phase = 0;

  void adopt(std::span<const double> candidate, double value,
             const ComponentFn& probe, std::size_t current_phase) {
    x.assign(candidate.begin(), candidate.end());
    total = value;
    phase = current_phase;
    if (probe) components = probe(candidate);
  }
};

TraceRow make_row(std::uint64_t generation, std::uint64_t evaluations,
                  const BestTracker& best, double sigma) {
  TraceRow row;
  row.generation = generation;
  row.evaluations = evaluations;
  row.best_total = best.total;
  row.best_r2 = best.components.r2;
  row.op_penalty = best.components.op_penalty;
  row.var_penalty = best.components.var_penalty;
  row.sigma = sigma;
  return row;
}

std::vector<double> resolve_mean(const OptimizerConfig& config) {
  if (!config.initial_mean.empty()) return config.initial_mean;
  return std::vector<double>(config.dimension, 0.0);
}

// Re-score the tracked best when the penalty phase changed so the elitist
// total is comparable with the upcoming generation.  Consumes one evaluation.
void rescore_on_phase_change(const ObjectiveFn& f, const OptimizerConfig& cfg,
                             BestTracker& best, std::uint64_t& counteval) {
  const std::size_t current = phase_of(cfg.schedule_boundaries, counteval);
  if (current == best.phase || best.x.empty()) return;
  best.total = rank_key(f(best.x, counteval));
  best.phase = current;
  ++counteval;
}

}  // namespace

void OptimizerConfig::validate() const {
  if (dimension < 1) throw std::invalid_argument("dimension must be >= 1");
  if (population == 1)
    throw std::invalid_argument("population must be 0 (default) or >= 2");
  if (!(sigma0 > 0.0)) throw std::invalid_argument("sigma0 must be positive");
  if (!initial_mean.empty()) {
    if (initial_mean.size() != dimension)
      throw std::invalid_argument("initial mean size must match dimension");
    for (double v : initial_mean)
      if (!std::isfinite(v))
        throw std::invalid_argument("initial mean must be finite");
  }
  if (threads < 0) throw std::invalid_argument("threads must be >= 0");
  for (std::size_t i = 0; i < schedule_boundaries.size(); ++i) {
    if (schedule_boundaries[i] == 0)
      throw std::invalid_argument("schedule boundaries must be positive");
    if (i > 0 && schedule_boundaries[i] <= schedule_boundaries[i - 1])
      throw std::invalid_argument(
          "schedule boundaries must be strictly increasing");
  }
}

std::size_t OptimizerConfig::effective_population() const {
  if (population != 0) return population;
  const double n = static_cast<double>(dimension);
  return 4 + static_cast<std::size_t>(std::floor(3.0 * std::log(n)));
}

CmaesParameters cmaes_parameters(std::size_t dimension, std::size_t lambda) {
  if (dimension < 1 || lambda < 2)
    throw std::invalid_argument("need dimension >= 1 and lambda >= 2");
  CmaesParameters p;
  p.lambda = lambda;
  p.mu = lambda / 2;
  const double n = static_cast<double>(dimension);
  p.weights.resize(p.mu);
  for (std::size_t i = 0; i < p.mu; ++i)
    p.weights[i] = std::log(static_cast<double>(p.mu) + 0.5) -
                   std::log(static_cast<double>(i) + 1.0);
  const double wsum =
      std::accumulate(p.weights.begin(), p.weights.end(), 0.0);
  double sq = 0.0;
  for (double& w : p.weights) {
    w /= wsum;
    sq += w * w;
  }
  p.mu_eff = 1.0 / sq;
  p.c_sigma = (p.mu_eff + 2.0) / (n + p.mu_eff + 5.0);
  p.d_sigma =
      1.0 +
      2.0 * std::max(0.0, std::sqrt((p.mu_eff - 1.0) / (n + 1.0)) - 1.0) +
      p.c_sigma;
  p.c_c = (4.0 + p.mu_eff / n) / (n + 4.0 + 2.0 * p.mu_eff / n);
  p.c_1 = 2.0 / ((n + 1.3) * (n + 1.3) + p.mu_eff);
  p.c_mu = std::min(1.0 - p.c_1,
                    2.0 * (p.mu_eff - 2.0 + 1.0 / p.mu_eff) /
                        ((n + 2.0) * (n + 2.0) + p.mu_eff));
  p.chi_n = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
  return p;
}

RunTrace cmaes_minimize(const ObjectiveFn& f, const OptimizerConfig& config) {
  config.validate();
  if (!f) throw std::invalid_argument("objective is empty");

  const std::size_t n = config.dimension;
  const std::size_t lambda = config.effective_population();
  const CmaesParameters par = cmaes_parameters(n, lambda);
  const int threads = resolve_threads(config.threads);

  RunTrace trace;
  Rng rng(config.seed);

  const std::vector<double> mean0 = resolve_mean(config);
  Eigen::VectorXd mean = Eigen::Map<const Eigen::VectorXd>(
      mean0.data(), static_cast<Eigen::Index>(n));
  double sigma = config.sigma0;
  Eigen::MatrixXd C = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd B = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd D = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd p_sigma = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd p_c = Eigen::VectorXd::Zero(n);

  std::uint64_t counteval = 0;
  std::uint64_t generation = 0;
  std::uint64_t eigen_eval = 0;

  BestTracker best;
  {
    const std::span<const double> m0{mean.data(), n};
    const double f0 = f(m0, counteval);
    ++counteval;
    best.adopt(m0, rank_key(f0), config.component_fn,
               phase_of(config.schedule_boundaries, 0));
  }
  trace.rows.push_back(make_row(0, counteval, best, sigma));
  if (config.target_value && best.total <= *config.target_value) {
    trace.status = RunStatus::target_reached;
    trace.best = best.x;
    trace.best_total = best.total;
    trace.best_components = best.components;
    trace.evaluations = counteval;
    return trace;
  }

  Eigen::MatrixXd Z(n, lambda), Y(n, lambda), X(n, lambda);
  std::vector<double> fitness(lambda);
  std::vector<std::size_t> order(lambda);

  const double eigen_gap =
      static_cast<double>(lambda) / ((par.c_1 + par.c_mu) * double(n) * 10.0);

  trace.status = RunStatus::completed;
  while (counteval + lambda <= config.max_evaluations) {
    rescore_on_phase_change(f, config, best, counteval);
    if (counteval + lambda > config.max_evaluations) break;

    if (static_cast<double>(counteval - eigen_eval) > eigen_gap) {
      eigen_eval = counteval;
      C = (C + C.transpose()) * 0.5;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(C);
      if (solver.info() != Eigen::Success) {
        trace.status = RunStatus::aborted_numerical;
        trace.message = "covariance eigendecomposition failed";
        break;
      }
      Eigen::VectorXd ev = solver.eigenvalues();
      const double ev_max = ev.maxCoeff();
      if (!std::isfinite(ev_max) || ev_max <= 0.0 ||
          ev.minCoeff() < -1e-8 * ev_max) {
        trace.status = RunStatus::aborted_numerical;
        trace.message = "covariance not positive definite after repair";
        break;
      }
      const double floor_ev = 1e-14 * ev_max;
      for (Eigen::Index i = 0; i < ev.size(); ++i)
        ev(i) = std::max(ev(i), floor_ev);
      B = solver.eigenvectors();
      D = ev.cwiseSqrt();
    }

    // Sample sequentially (one RNG stream), evaluate in parallel.
    for (std::size_t i = 0; i < lambda; ++i)
      for (std::size_t j = 0; j < n; ++j) Z(j, i) = rng.normal();
    Y = B * (D.asDiagonal() * Z);
    X = (sigma * Y).colwise() + mean;

    const std::uint64_t base = counteval;
    parallel_for(lambda, threads, [&](std::size_t i) {
      fitness[i] = f({X.col(i).data(), n}, base + i);
    });
    counteval += lambda;
    ++generation;

    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                       return rank_key(fitness[a]) < rank_key(fitness[b]);
                     });

    const Eigen::VectorXd mean_old = mean;
    mean.setZero();
    for (std::size_t i = 0; i < par.mu; ++i)
      mean += par.weights[i] * X.col(order[i]);
    const Eigen::VectorXd y_w = (mean - mean_old) / sigma;

    const Eigen::VectorXd c_inv_sqrt_yw =
        B * D.cwiseInverse().asDiagonal() * (B.transpose() * y_w);
    p_sigma = (1.0 - par.c_sigma) * p_sigma +
              std::sqrt(par.c_sigma * (2.0 - par.c_sigma) * par.mu_eff) *
                  c_inv_sqrt_yw;
    const double ps_norm = p_sigma.norm();
    const double denom = std::sqrt(
        1.0 - std::pow(1.0 - par.c_sigma, 2.0 * double(generation)));
    const bool h_sigma =
        ps_norm / denom / par.chi_n < 1.4 + 2.0 / (double(n) + 1.0);

    p_c = (1.0 - par.c_c) * p_c +
          (h_sigma ? std::sqrt(par.c_c * (2.0 - par.c_c) * par.mu_eff) : 0.0) *
              y_w;

    Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < par.mu; ++i) {
      const Eigen::VectorXd yi = Y.col(order[i]);
      rank_mu.noalias() += par.weights[i] * (yi * yi.transpose());
    }
    const double old_scale =
        1.0 - par.c_1 - par.c_mu +
        (h_sigma ? 0.0 : par.c_1 * par.c_c * (2.0 - par.c_c));
    C = old_scale * C + par.c_1 * (p_c * p_c.transpose()) + par.c_mu * rank_mu;

    const double sampled_sigma = sigma;
    sigma *= std::exp((par.c_sigma / par.d_sigma) *
                      (ps_norm / par.chi_n - 1.0));
    if (!std::isfinite(sigma) || !mean.allFinite()) {
      trace.status = RunStatus::aborted_numerical;
      trace.message = "step size or mean became non-finite";
      trace.rows.push_back(make_row(generation, counteval, best, sigma));
      break;
    }

    const std::size_t lead = order[0];
    if (rank_key(fitness[lead]) < best.total)
      best.adopt({X.col(lead).data(), n}, fitness[lead], config.component_fn,
                 phase_of(config.schedule_boundaries, base + lead));
    trace.rows.push_back(make_row(generation, counteval, best, sampled_sigma));

    if (config.target_value && best.total <= *config.target_value) {
      trace.status = RunStatus::target_reached;
      break;
    }
  }

  trace.best = best.x;
  trace.best_total = best.total;
  trace.best_components = best.components;
  trace.evaluations = counteval;
  return trace;
}

RunTrace one_plus_one_minimize(const ObjectiveFn& f,
                               const OptimizerConfig& config) {
  config.validate();
  if (!f) throw std::invalid_argument("objective is empty");

  const std::size_t n = config.dimension;
  RunTrace trace;
  Rng rng(config.seed);

  std::vector<double> x = resolve_mean(config);
  std::vector<double> candidate(n);
  double sigma = config.sigma0;
  const double damping = std::sqrt(static_cast<double>(n) + 1.0);

  std::uint64_t counteval = 0;
  BestTracker best;
  best.adopt(x, rank_key(f(x, counteval)), config.component_fn,
             phase_of(config.schedule_boundaries, 0));
  ++counteval;
  trace.rows.push_back(make_row(0, counteval, best, sigma));

  trace.status = RunStatus::completed;
  std::uint64_t iteration = 0;
  while (counteval < config.max_evaluations &&
         !(config.target_value && best.total <= *config.target_value)) {
    rescore_on_phase_change(f, config, best, counteval);
    if (counteval >= config.max_evaluations) break;

    for (std::size_t j = 0; j < n; ++j)
      candidate[j] = best.x[j] + sigma * rng.normal();
    const double value = rank_key(f(candidate, counteval));
    ++counteval;
    ++iteration;

    const bool success = value < best.total;
    if (success)
      best.adopt(candidate, value, config.component_fn,
                 phase_of(config.schedule_boundaries, counteval - 1));
    sigma *= std::exp((success ? 0.8 : -0.2) / damping);
    if (!std::isfinite(sigma)) {
      trace.status = RunStatus::aborted_numerical;
      trace.message = "step size became non-finite";
      break;
    }
    if (success)
      trace.rows.push_back(make_row(iteration, counteval, best, sigma));
  }
  if (config.target_value && best.total <= *config.target_value)
    trace.status = RunStatus::target_reached;
  if (trace.rows.back().evaluations != counteval)
    trace.rows.push_back(make_row(iteration, counteval, best, sigma));

  trace.best = best.x;
  trace.best_total = best.total;
  trace.best_components = best.components;
  trace.evaluations = counteval;
  return trace;
}

}  // namespace smoothsr
