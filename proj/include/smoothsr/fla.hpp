#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "smoothsr/objective.hpp"
#include "smoothsr/rng.hpp"

namespace smoothsr {

enum class ManipulatorKind {
  polynomial_one_position,
  polynomial_all_position,
  uniform_one_position,
};

struct Manipulator {
  ManipulatorKind kind = ManipulatorKind::polynomial_one_position;
  double contiguity = 15.0;       // polynomial kinds: distribution index
  double max_manipulation = 1.0;  // polynomial kinds: step scale
  double uniform_lo = -3.0;       // uniform kind: replacement bounds
  double uniform_hi = 3.0;

  // Canonical name: poly-1-<c>, poly-all-<c>, uni-1.
  std::string name() const;
  void validate() const;
};

// Parses a canonical manipulator name; throws listing valid forms.
Manipulator parse_manipulator(const std::string& name);

// Polynomial-mutation offset: u < 0.5 -> (2u)^(1/(c+1)) - 1,
// else 1 - (2(1-u))^(1/(c+1)).  Zero exactly at u = 0.5.
double polynomial_delta(double u, double contiguity);

// One neighborhood move.  Draw order per kind: one-position kinds draw the
// index first, then the offset; all-position draws one u per coordinate.
std::vector<double> mutate(std::span<const double> x, const Manipulator& m,
                           Rng& rng);

// Plain objective for walks: penalties at fixed lambdas, schedule disabled.
using WalkObjective = std::function<double(std::span<const double>)>;

enum class WalkKind { random, up, down };

struct WalkTrace {
  WalkKind kind = WalkKind::random;
  std::vector<double> fitness;  // length = steps + 1
  std::uint64_t steps = 0;      // random: mutations applied; adaptive: accepted moves
  std::uint64_t seed = 0;
  Manipulator manipulator;
  bool hit_non_finite = false;  // some objective value was recorded-as-worst
};

WalkTrace random_walk(std::span<const double> start, std::uint64_t steps,
                      const Manipulator& m, const WalkObjective& f,
                      std::uint64_t seed);

struct AdaptiveWalkConfig {
  std::size_t neighbors_per_step = 100;
  std::uint64_t max_steps = 100000;
};

// Best-of-s hill climbing: move to the best strictly-improving neighbor
// (down = lower value, up = higher); stop when no neighbor improves or the
// step cap is reached.
WalkTrace adaptive_walk(std::span<const double> start, WalkKind direction,
                        const AdaptiveWalkConfig& cfg, const Manipulator& m,
                        const WalkObjective& f, std::uint64_t seed);

struct AutoCorrelation {
  double value = 0.0;
  bool degenerate = false;  // zero variance on either side
};

// Pearson correlation of (f_t, f_{t+lag}); requires trace length > lag + 1.
AutoCorrelation auto_correlation(std::span<const double> trace,
                                 std::size_t lag);

// Smallest lag whose correlation drops below 2/sqrt(L - lag), minus one;
// scans lags 1..L/2 and returns L/2 if significance never drops.
std::size_t correlation_length(std::span<const double> trace);

struct InformationAnalysis {
  double information_content = 0.0;        // H, log base 6 over unequal pairs
  double density_basin_information = 0.0;  // h, log base 3 over equal pairs
  double partial_information_content = 0.0;  // M = |collapsed nonzero| / T
  double information_stability = 0.0;         // max |f_{t+1} - f_t|
};

// Vassilev-style symbol analysis of the fitness differences with dead-zone
// sensitivity epsilon (|diff| <= epsilon reads as flat).
InformationAnalysis information_analysis(std::span<const double> trace,
                                         double epsilon);

struct FlaReport {
  std::string manipulator_name;
  double rho1 = 0.0;
  bool rho1_degenerate = false;
  std::size_t correlation_length = 0;
  double information_content = 0.0;
  double density_basin_information = 0.0;
  double partial_information_content = 0.0;
  double information_stability = 0.0;
  double up_walk_mean = 0.0;
  double up_walk_variance = 0.0;
  double down_walk_mean = 0.0;
  double down_walk_variance = 0.0;
  bool has_walk_lengths = false;  // false when repetitions = 0
  double epsilon = 0.0;
};

struct BatteryConfig {
  std::uint64_t walk_length = 10000;   // random-walk steps per manipulator
  std::size_t repetitions = 100;       // adaptive walks per direction
  std::size_t neighbors_per_step = 100;
  std::uint64_t max_steps = 1000;      // adaptive walk cap
  double epsilon = 0.0;
  double lambda_op = 0.1;
  double lambda_var = 0.1;
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const;
};

// Optional per-walk persistence hook, called in deterministic order after all
// walks finish: (manipulator index, walk index within manipulator, trace).
using TraceSink =
    std::function<void(std::size_t, std::size_t, const WalkTrace&)>;

// One random walk plus r up and r down adaptive walks per manipulator, all
// from standard-normal starts with per-walk derived seeds; walks across the
// whole battery run concurrently and results are identical for any thread
// count.
std::vector<FlaReport> fla_battery(const SmoothProblem& problem,
                                   const std::vector<Manipulator>& manipulators,
                                   const BatteryConfig& cfg,
                                   const TraceSink& sink = {});

// Table-shaped CSV: measure-name column plus one column per manipulator.
void write_fla_csv(const std::vector<FlaReport>& reports, std::ostream& out);

}  // namespace smoothsr
