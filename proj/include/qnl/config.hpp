// Run configuration: defaults, JSON parsing with key-path diagnostics, and
// conversion to the solver-level option structs.
#ifndef QNL_CONFIG_HPP
#define QNL_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "qnl/analysis.hpp"
#include "qnl/model.hpp"
#include "qnl/spectral2d.hpp"
#include "qnl/tdqmc.hpp"

namespace qnl {

struct GridConfig {
  int points = 256;
  double span = 20.0;

  friend bool operator==(const GridConfig&, const GridConfig&) = default;
};

/// Which electrons the sine drive acts on.
enum class DrivenElectrons { first, second, both };

struct FieldConfig {
  double amplitude = 15.0;
  double omega = 5.0;
  double phase = 0.0;
  DrivenElectrons driven = DrivenElectrons::first;

  friend bool operator==(const FieldConfig&, const FieldConfig&) = default;
};

struct ExactConfig {
  double dtau = 0.002;
  double dt = 0.001;
  /// Relaxation stops when E changes by less than this over check_stride.
  double energy_tol = 1e-13;
  int check_stride = 10;
  int max_steps = 200000;
  double initial_width = 1.0;
  /// Bohmian trajectories sampled from |Psi|^2 at t = 0.
  int trajectories = 40;
  int snapshot_stride = 10;
  double edge_limit = 1e-6;

  friend bool operator==(const ExactConfig&, const ExactConfig&) = default;
};

struct TdqmcConfig {
  int walkers = 1000;
  double sigma = 0.82;
  /// Extra sigma values for the entropy sensitivity study.
  std::vector<double> sigma_compare{0.70, 1.0};
  double dtau = 0.01;
  double dt = 0.002;
  int stage1_steps = 600;
  double stage2_tol = 1e-7;
  int stage2_max_steps = 5000;
  int record_stride = 10;
  double initial_width = 1.0;
  bool drift = true;
  double diffusion = 0.5;
  /// Real-time steps between recorded walker positions and dipoles.
  int snapshot_stride = 5;
  /// Real-time steps between entropy evaluations.
  int entropy_stride = 25;
  /// Walkers per electron written out as trajectories.
  int trajectories = 40;

  friend bool operator==(const TdqmcConfig&, const TdqmcConfig&) = default;
};

struct EvolveConfig {
  double duration = 6.0;

  friend bool operator==(const EvolveConfig&, const EvolveConfig&) = default;
};

struct SweepConfig {
  std::vector<double> sigmas{0.4, 0.5, 0.6, 0.7, 0.8, 0.9,
                             1.0, 1.1, 1.2, 1.3, 1.4};
  int degree = 4;
  SeedPolicy seeds = SeedPolicy::common;

  friend bool operator==(const SweepConfig&, const SweepConfig&) = default;
};

enum class SolverChoice { exact, tdqmc, both };

struct RunConfig {
  SystemSpec system;
  GridConfig grid;
  FieldConfig field;
  ExactConfig exact;
  TdqmcConfig tdqmc;
  EvolveConfig evolve;
  SweepConfig sweep;
  SolverChoice solver = SolverChoice::both;
  std::uint64_t seed = 42;
  std::string scenario = "fig1a";
  std::filesystem::path output_dir = "qnl-out";
  /// Write a gnuplot script next to each CSV.
  bool plot_scripts = true;
  bool force = false;

  /// Throws ValidationError naming the offending key.
  void validate() const;

  Grid1D grid1d() const { return Grid1D(grid.points, grid.span); }
  FieldSpec field_spec() const;
  FieldSpec field_spec(DrivenElectrons driven) const;
  ImaginaryStepParams imaginary_step() const;
  GroundStateOptions ground_options() const;
  SweepOptions sweep_options() const;
  RelaxOptions relax_options() const;
  PropagationSchedule exact_schedule() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

const std::vector<std::string>& scenario_names();

/// Parse JSON text. Missing keys keep their defaults; unknown keys and type
/// mismatches raise ValidationError with the full key path.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config(const std::filesystem::path& path);
/// Every field, as JSON text that parse_config_text accepts.
std::string serialize(const RunConfig& config);

/// Environment variable that overrides output_dir.
inline constexpr const char* kOutputDirEnv = "QNL_OUTPUT_DIR";

}  // namespace qnl

#endif  // QNL_CONFIG_HPP
