// Experiment-level computations: sigma sweeps and their polynomial fit,
// the classical dipole oracle for a harmonic trap, and the idler ratio.
#ifndef QNL_ANALYSIS_HPP
#define QNL_ANALYSIS_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "qnl/model.hpp"
#include "qnl/spectral2d.hpp"
#include "qnl/tdqmc.hpp"

namespace qnl {

struct SweepRow {
  double sigma = 0.0;
  double energy = 0.0;  // E2
  double error = 0.0;   // standard error of E2
  double mixed = 0.0;   // E1
  std::uint64_t seed = 0;
  int walkers = 0;
  bool converged = true;
};

struct SweepTable {
  std::vector<SweepRow> rows;

  /// sigma strictly increasing, errors non-negative.
  void validate() const;
  std::vector<SweepRow> converged_rows() const;
};

enum class SeedPolicy {
  /// Every sigma uses the master seed (common random numbers).
  common,
  /// Each sigma gets its own seed derived from (master seed, sigma).
  independent,
};

struct SweepOptions {
  Grid1D grid{256, 20.0};
  int walkers = 1000;
  double initial_width = 1.0;
  std::uint64_t master_seed = 42;
  SeedPolicy seeds = SeedPolicy::common;
  GroundStateOptions ground;
  /// Called after each point with the finished row.
  std::function<void(const SweepRow&)> progress;
};

/// Seed used for one sigma under the given policy.
std::uint64_t sweep_seed(std::uint64_t master_seed, double sigma,
                         SeedPolicy policy);

/// One TDQMC ground state per sigma (applied to both electrons). Points that
/// fail to converge are kept, marked, and left out of fits.
SweepTable sigma_sweep(const std::vector<double>& sigmas,
                       const SystemSpec& system, const SweepOptions& options);

struct FitResult {
  int degree = 0;
  /// Ascending powers of sigma.
  Eigen::VectorXd coefficients;
  double sigma_star = 0.0;
  double e_star = 0.0;
  double residual_norm = 0.0;
  double condition_number = 0.0;
  /// False when the fitted curve is too flat for the minimum to mean much.
  bool unique_minimum = true;

  double operator()(double sigma) const;
};

inline constexpr double kMaxFitCondition = 1e12;

/// Least-squares polynomial through the converged rows and its minimum over
/// the swept range. Throws ValidationError with too few rows and
/// NumericalError when the design matrix is ill conditioned.
FitResult polyfit_min(const SweepTable& table, int degree);

enum class OdeMethod { closed_form, rk4 };

/// x'' = -2 c x + E_i(t), x(0) = x'(0) = 0, for each of two electrons,
/// sampled at multiples of dt up to T.
DipoleSeries ehrenfest_oracle(const FieldSpec& fields, double confinement,
                              double duration, double dt,
                              OdeMethod method = OdeMethod::closed_form);

struct IdlerRatio {
  double ratio = 0.0;
  double numerator = 0.0;
  double denominator = 0.0;
  /// Denominator was zero; ratio is +infinity.
  bool infinite = false;
};

/// max_t |d2(t)| of the interacting run over max_{k,t} |x2^k(t) - x2^k(0)|
/// of the non-interacting trajectories. Inputs are expected to be
/// reference-subtracted already.
IdlerRatio idler_ratio(const DipoleSeries& interacting,
                       const TrajectorySet& nonint);

/// Largest |x2^k(t) - x2^k(0)| over trajectories and times.
double max_idler_excursion(const TrajectorySet& set);

}  // namespace qnl

#endif  // QNL_ANALYSIS_HPP
