#include "smoothsr/fla.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "smoothsr/dataset.hpp"
#include "smoothsr/parallel.hpp"

namespace smoothsr {

namespace {

std::string format_contiguity(double c) {
  if (c == std::floor(c) && std::fabs(c) < 1e9) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.0f", c);
    return buf;
  }
  return format_double(c);
}

[[noreturn]] void bad_manipulator(const std::string& name) {
  throw std::invalid_argument(
      "unknown manipulator '" + name +
      "'; valid names: poly-1-<contiguity>, poly-all-<contiguity>, uni-1");
}

}  // namespace

std::string Manipulator::name() const {
  switch (kind) {
    case ManipulatorKind::polynomial_one_position:
      return "poly-1-" + format_contiguity(contiguity);
    case ManipulatorKind::polynomial_all_position:
      return "poly-all-" + format_contiguity(contiguity);
    case ManipulatorKind::uniform_one_position:
      return "uni-1";
  }
  throw std::logic_error("unreachable manipulator kind");
}

void Manipulator::validate() const {
  if (kind == ManipulatorKind::uniform_one_position) {
    if (!(uniform_lo < uniform_hi))
      throw std::invalid_argument("uniform bounds must satisfy lo < hi");
    return;
  }
  if (!(contiguity >= 0.0))
    throw std::invalid_argument("contiguity must be >= 0");
  if (!(max_manipulation > 0.0))
    throw std::invalid_argument("max manipulation must be positive");
}

Manipulator parse_manipulator(const std::string& name) {
  Manipulator m;
  if (name == "uni-1") {
    m.kind = ManipulatorKind::uniform_one_position;
    return m;
  }
  std::string rest;
  if (name.rfind("poly-1-", 0) == 0) {
    m.kind = ManipulatorKind::polynomial_one_position;
    rest = name.substr(7);
  } else if (name.rfind("poly-all-", 0) == 0) {
    m.kind = ManipulatorKind::polynomial_all_position;
    rest = name.substr(9);
  } else {
    bad_manipulator(name);
  }
  double c = 0.0;
  const auto res = std::from_chars(rest.data(), rest.data() + rest.size(), c);
  if (res.ec != std::errc{} || res.ptr != rest.data() + rest.size() ||
      !(c >= 0.0))
    bad_manipulator(name);
  m.contiguity = c;
  return m;
}

double polynomial_delta(double u, double contiguity) {
  const double e = 1.0 / (contiguity + 1.0);
  if (u < 0.5) return std::pow(2.0 * u, e) - 1.0;
  return 1.0 - std::pow(2.0 * (1.0 - u), e);
}

std::vector<double> mutate(std::span<const double> x, const Manipulator& m,
                           Rng& rng) {
  std::vector<double> out(x.begin(), x.end());
  switch (m.kind) {
    case ManipulatorKind::polynomial_one_position: {
      const std::size_t i = rng.index(out.size());
      out[i] += polynomial_delta(rng.uniform(), m.contiguity) *
                m.max_manipulation;
      break;
    }
    case ManipulatorKind::polynomial_all_position: {
      for (double& v : out)
        v += polynomial_delta(rng.uniform(), m.contiguity) *
             m.max_manipulation;
      break;
    }
    case ManipulatorKind::uniform_one_position: {
      const std::size_t i = rng.index(out.size());
      out[i] = rng.uniform(m.uniform_lo, m.uniform_hi);
      break;
    }
  }
  return out;
}

namespace {

// Applies the recorded-as-worst rule for non-finite objective values.
struct WalkRecorder {
  WalkTrace& trace;
  double worst = 0.0;
  bool any_finite = false;

  double record(double value) {
    if (std::isfinite(value)) {
      if (!any_finite || value > worst) worst = value;
      any_finite = true;
      trace.fitness.push_back(value);
      return value;
    }
    trace.hit_non_finite = true;
    trace.fitness.push_back(worst);
    return worst;
  }
};

void check_start(std::span<const double> start) {
  if (start.empty()) throw std::invalid_argument("walk start is empty");
  for (double v : start)
    if (!std::isfinite(v))
      throw std::invalid_argument("walk start must be finite");
}

}  // namespace

WalkTrace random_walk(std::span<const double> start, std::uint64_t steps,
                      const Manipulator& m, const WalkObjective& f,
                      std::uint64_t seed) {
  if (steps < 1) throw std::invalid_argument("random walk needs steps >= 1");
  check_start(start);
  m.validate();

  WalkTrace trace;
  trace.kind = WalkKind::random;
  trace.steps = steps;
  trace.seed = seed;
  trace.manipulator = m;
  trace.fitness.reserve(steps + 1);

  Rng rng(seed);
  WalkRecorder rec{trace};
  std::vector<double> x(start.begin(), start.end());
  rec.record(f(x));
  for (std::uint64_t t = 0; t < steps; ++t) {
    x = mutate(x, m, rng);
    rec.record(f(x));
  }
  return trace;
}

WalkTrace adaptive_walk(std::span<const double> start, WalkKind direction,
                        const AdaptiveWalkConfig& cfg, const Manipulator& m,
                        const WalkObjective& f, std::uint64_t seed) {
  if (direction == WalkKind::random)
    throw std::invalid_argument("adaptive walk direction must be up or down");
  if (cfg.neighbors_per_step < 1)
    throw std::invalid_argument("need at least one neighbor per step");
  check_start(start);
  m.validate();

  WalkTrace trace;
  trace.kind = direction;
  trace.seed = seed;
  trace.manipulator = m;

  Rng rng(seed);
  WalkRecorder rec{trace};
  std::vector<double> x(start.begin(), start.end());
  double fx = rec.record(f(x));

  const bool down = direction == WalkKind::down;
  std::vector<double> best_neighbor;
  for (std::uint64_t step = 0; step < cfg.max_steps; ++step) {
    bool found = false;
    double best_value = 0.0;
    for (std::size_t j = 0; j < cfg.neighbors_per_step; ++j) {
      std::vector<double> cand = mutate(x, m, rng);
      const double v = f(cand);
      if (!std::isfinite(v)) {
        trace.hit_non_finite = true;
        continue;  // non-finite neighbors never improve
      }
      const bool improves = down ? v < fx : v > fx;
      const bool better_than_best = down ? v < best_value : v > best_value;
      if (improves && (!found || better_than_best)) {
        found = true;
        best_value = v;
        best_neighbor = std::move(cand);
      }
    }
    if (!found) break;
    x = std::move(best_neighbor);
    fx = rec.record(best_value);
    ++trace.steps;
  }
  return trace;
}

AutoCorrelation auto_correlation(std::span<const double> trace,
                                 std::size_t lag) {
  if (lag < 1) throw std::invalid_argument("lag must be >= 1");
  if (trace.size() <= lag + 1)
    throw std::invalid_argument("trace length must exceed lag + 1");
  const std::size_t pairs = trace.size() - lag;
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t t = 0; t < pairs; ++t) {
    mean_a += trace[t];
    mean_b += trace[t + lag];
  }
  mean_a /= static_cast<double>(pairs);
  mean_b /= static_cast<double>(pairs);
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t t = 0; t < pairs; ++t) {
    const double da = trace[t] - mean_a;
    const double db = trace[t + lag] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a <= 0.0 || var_b <= 0.0) return {0.0, true};
  const double r = cov / std::sqrt(var_a * var_b);
  if (!std::isfinite(r)) return {0.0, true};
  return {std::clamp(r, -1.0, 1.0), false};
}

std::size_t correlation_length(std::span<const double> trace) {
  const std::size_t len = trace.size();
  if (len < 10)
    throw std::invalid_argument("correlation length needs >= 10 trace points");
  const std::size_t max_lag = len / 2;
  for (std::size_t lag = 1; lag <= max_lag; ++lag) {
    const double cutoff =
        2.0 / std::sqrt(static_cast<double>(len - lag));
    if (std::fabs(auto_correlation(trace, lag).value) < cutoff)
      return lag - 1;
  }
  return max_lag;
}

InformationAnalysis information_analysis(std::span<const double> trace,
                                         double epsilon) {
  if (trace.size() < 3)
    throw std::invalid_argument("information analysis needs >= 3 points");
  if (!(epsilon >= 0.0))
    throw std::invalid_argument("epsilon must be >= 0");

  const std::size_t symbols = trace.size() - 1;
  std::vector<int> s(symbols);
  InformationAnalysis out;
  for (std::size_t t = 0; t < symbols; ++t) {
    const double d = trace[t + 1] - trace[t];
    out.information_stability =
        std::max(out.information_stability, std::fabs(d));
    s[t] = d > epsilon ? 1 : (d < -epsilon ? -1 : 0);
  }

  double counts[3][3] = {};
  const std::size_t pairs = symbols - 1;
  for (std::size_t t = 0; t < pairs; ++t) ++counts[s[t] + 1][s[t + 1] + 1];

  const double log6 = std::log(6.0);
  const double log3 = std::log(3.0);
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      if (counts[a][b] <= 0.0) continue;
      const double p = counts[a][b] / static_cast<double>(pairs);
      if (a != b) out.information_content -= p * std::log(p) / log6;
      else out.density_basin_information -= p * std::log(p) / log3;
    }
  }

  // Partial information content: drop flats, collapse repeats, count blocks.
  std::size_t mu = 0;
  int last = 0;
  for (int v : s) {
    if (v == 0 || v == last) continue;
    ++mu;
    last = v;
  }
  out.partial_information_content =
      static_cast<double>(mu) / static_cast<double>(symbols);
  return out;
}

void BatteryConfig::validate() const {
  if (walk_length < 9)
    throw std::invalid_argument("walk length must be >= 9");
  if (neighbors_per_step < 1)
    throw std::invalid_argument("neighbors per step must be >= 1");
  if (max_steps < 1) throw std::invalid_argument("max steps must be >= 1");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be >= 0");
  if (lambda_op < 0.0 || lambda_var < 0.0)
    throw std::invalid_argument("penalty weights must be non-negative");
}

std::vector<FlaReport> fla_battery(const SmoothProblem& problem,
                                   const std::vector<Manipulator>& manipulators,
                                   const BatteryConfig& cfg,
                                   const TraceSink& sink) {
  problem.validate();
  cfg.validate();
  if (manipulators.empty())
    throw std::invalid_argument("need at least one manipulator");
  for (const auto& m : manipulators) m.validate();

  // Walks see fixed penalty weights; the schedule is an optimizer concept.
  PenaltyConfig walk_penalty;
  walk_penalty.lambda_op = cfg.lambda_op;
  walk_penalty.lambda_var = cfg.lambda_var;
  walk_penalty.var_allowance = problem.penalty.var_allowance;
  const WalkObjective f = [&](std::span<const double> x) {
    const Genotype g(x.begin(), x.end());
    return objective(g, problem.layout, problem.data, walk_penalty, 0).total;
  };

  const std::size_t walks_per_manip = 1 + 2 * cfg.repetitions;
  const std::size_t total = manipulators.size() * walks_per_manip;
  std::vector<WalkTrace> traces(total);
  const std::size_t dim = problem.layout.total_dim;
  const AdaptiveWalkConfig awc{cfg.neighbors_per_step, cfg.max_steps};

  parallel_for(total, resolve_threads(cfg.threads), [&](std::size_t job) {
    const std::size_t mi = job / walks_per_manip;
    const std::size_t wi = job % walks_per_manip;
    const std::uint64_t walk_seed = derive_seed(cfg.seed, mi, wi);
    Rng start_rng(derive_seed(cfg.seed, mi, wi, 1));
    std::vector<double> start(dim);
    for (double& v : start) v = start_rng.normal();

    const Manipulator& m = manipulators[mi];
    if (wi == 0) {
      traces[job] = random_walk(start, cfg.walk_length, m, f, walk_seed);
    } else if (wi <= cfg.repetitions) {
      traces[job] = adaptive_walk(start, WalkKind::up, awc, m, f, walk_seed);
    } else {
      traces[job] = adaptive_walk(start, WalkKind::down, awc, m, f, walk_seed);
    }
  });

  std::vector<FlaReport> reports;
  reports.reserve(manipulators.size());
  for (std::size_t mi = 0; mi < manipulators.size(); ++mi) {
    const WalkTrace& rw = traces[mi * walks_per_manip];
    FlaReport rep;
    rep.manipulator_name = manipulators[mi].name();
    rep.epsilon = cfg.epsilon;
    const auto ac = auto_correlation(rw.fitness, 1);
    rep.rho1 = ac.value;
    rep.rho1_degenerate = ac.degenerate;
    rep.correlation_length = correlation_length(rw.fitness);
    const auto info = information_analysis(rw.fitness, cfg.epsilon);
    rep.information_content = info.information_content;
    rep.density_basin_information = info.density_basin_information;
    rep.partial_information_content = info.partial_information_content;
    rep.information_stability = info.information_stability;

    if (cfg.repetitions > 0) {
      rep.has_walk_lengths = true;
      const auto stats = [&](std::size_t first) {
        double mean = 0.0;
        for (std::size_t r = 0; r < cfg.repetitions; ++r)
          mean += static_cast<double>(
              traces[mi * walks_per_manip + first + r].steps);
        mean /= static_cast<double>(cfg.repetitions);
        double var = 0.0;
        if (cfg.repetitions > 1) {
          for (std::size_t r = 0; r < cfg.repetitions; ++r) {
            const double d = static_cast<double>(
                                 traces[mi * walks_per_manip + first + r]
                                     .steps) -
                             mean;
            var += d * d;
          }
          var /= static_cast<double>(cfg.repetitions - 1);
        }
        return std::pair<double, double>(mean, var);
      };
      std::tie(rep.up_walk_mean, rep.up_walk_variance) = stats(1);
      std::tie(rep.down_walk_mean, rep.down_walk_variance) =
          stats(1 + cfg.repetitions);
    }
    reports.push_back(std::move(rep));
  }

  if (sink)
    for (std::size_t mi = 0; mi < manipulators.size(); ++mi)
      for (std::size_t wi = 0; wi < walks_per_manip; ++wi)
        sink(mi, wi, traces[mi * walks_per_manip + wi]);

  return reports;
}

void write_fla_csv(const std::vector<FlaReport>& reports, std::ostream& out) {
  out << "measure";
  for (const auto& r : reports) out << ',' << r.manipulator_name;
  out << '\n';

  const auto row = [&](const char* label, auto getter) {
    out << label;
    for (const auto& r : reports) out << ',' << getter(r);
    out << '\n';
  };
  row("auto correlation",
      [](const FlaReport& r) { return format_double(r.rho1); });
  row("corr. length",
      [](const FlaReport& r) { return std::to_string(r.correlation_length); });
  row("density basin information", [](const FlaReport& r) {
    return format_double(r.density_basin_information);
  });
  row("information content", [](const FlaReport& r) {
    return format_double(r.information_content);
  });
  row("information stability", [](const FlaReport& r) {
    return format_double(r.information_stability);
  });
  row("partial inf. content", [](const FlaReport& r) {
    return format_double(r.partial_information_content);
  });
  const auto walk_cell = [](const FlaReport& r, double v) {
    return r.has_walk_lengths ? format_double(v) : std::string();
  };
  row("up walk length",
      [&](const FlaReport& r) { return walk_cell(r, r.up_walk_mean); });
  row("up walk len. variance",
      [&](const FlaReport& r) { return walk_cell(r, r.up_walk_variance); });
  row("down walk length",
      [&](const FlaReport& r) { return walk_cell(r, r.down_walk_mean); });
  row("down walk len. variance",
      [&](const FlaReport& r) { return walk_cell(r, r.down_walk_variance); });
}

}  // namespace smoothsr
