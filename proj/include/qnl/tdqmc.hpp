// Time-dependent quantum Monte Carlo: per-walker guide waves on a 1D grid
// coupled through a kernel-weighted Monte Carlo effective potential, with
// drift-diffusion walkers in imaginary time and Bohmian walkers in real time.
#ifndef QNL_TDQMC_HPP
#define QNL_TDQMC_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "qnl/fft.hpp"
#include "qnl/model.hpp"
#include "qnl/spectral2d.hpp"

namespace qnl {

/// Guide waves and walkers of one electron.
struct ElectronEnsemble {
  /// n_points x M; column k is the guide wave of walker k.
  Eigen::MatrixXcd waves;
  Eigen::VectorXd walkers;
  /// Nonlocality length of this electron's cloud, as seen by the others.
  double sigma = 0.82;
  /// One private stream per walker.
  std::vector<RngStream> rng;
  /// Last accepted real-time velocity, reused at nodes.
  Eigen::VectorXd velocity;
  /// Real-time walkers that hit the box edge and were clamped.
  std::vector<int> edge_flags;
};

struct TdqmcEnsemble {
  Grid1D grid;
  std::vector<ElectronEnsemble> electrons;
  std::uint64_t master_seed = 0;
  /// Real time, or accumulated tau while preparing the ground state.
  double time = 0.0;
  TimeMode mode = TimeMode::imaginary;

  int walker_count() const {
    return electrons.empty() ? 0 : int(electrons.front().walkers.size());
  }
  int electron_count() const { return int(electrons.size()); }
  void validate() const;
};

/// Stream id of walker k of electron i.
inline std::uint64_t walker_stream(int electron, int walker) {
  return (std::uint64_t(electron) << 32) | std::uint64_t(walker);
}

/// Every guide wave is the normalised Gaussian of the given width; walkers
/// are drawn from its density with their own streams.
TdqmcEnsemble init_ensemble(int walkers, double width, const Grid1D& grid,
                            const std::vector<double>& sigmas,
                            std::uint64_t master_seed);

/// Nonlocality kernel exp(-|x - x_ref|^2 / (2 sigma^2)).
double kernel_weight(double x, double x_ref, double sigma);

/// V_eff^k for electron i on the grid:
///   sum_{j != i} (1/Z_j^k) sum_l V_ee(x, x_j^l) K(x_j^l, x_j^k, sigma_j),
///   Z_j^k = sum_l K(x_j^l, x_j^k, sigma_j).
Eigen::VectorXd effective_potential(const TdqmcEnsemble& ensemble,
                                    const SystemSpec& system, int electron,
                                    int walker);

/// All M effective potentials of electron i as columns (n_points x M).
/// Agrees with effective_potential() column by column up to rounding;
/// the result is independent of the thread count.
Eigen::MatrixXd effective_potentials(const TdqmcEnsemble& ensemble,
                                     const SystemSpec& system, int electron);

/// Strang split-step for a batch of 1D guide waves.
class GuideWaveStepper {
 public:
  GuideWaveStepper(const Grid1D& grid, const SystemSpec& system,
                   TimeMode mode, double dt);

  /// Advance every column of `waves` by one step from time t. `veff` holds
  /// one potential column per wave; `field` is E_i at the mid-step time.
  void advance(Eigen::MatrixXcd& waves, const Eigen::MatrixXd& veff,
               double field) const;

  TimeMode mode() const { return mode_; }
  double dt() const { return dt_; }

 private:
  Grid1D grid_;
  TimeMode mode_;
  double dt_;
  Eigen::ArrayXd x_;
  Eigen::ArrayXd confinement_;
  Eigen::ArrayXcd kinetic_;  // includes 1/n
  FftPlan plan_;
};

/// One guide-wave step for every walker of electron i, with effective
/// potentials taken from the current walker snapshot and the external field
/// sampled at mid-step.
void guide_wave_step(TdqmcEnsemble& ensemble, const SystemSpec& system,
                     const FieldSpec& fields, int electron, double dt,
                     TimeMode mode);

struct ImaginaryStepParams {
  double dtau = 0.01;
  /// D in the noise variance 2 D dtau. D = 0 gives pure drift.
  double diffusion = 0.5;
  bool include_drift = true;

  void validate() const;
};

/// dx = Re[grad phi / phi](x) dtau + sqrt(2 D dtau) eta, reflected at the
/// grid ends. Each walker draws from its own stream.
void walker_drift_diffusion_step(TdqmcEnsemble& ensemble,
                                 const ImaginaryStepParams& params);

struct Estimate {
  double value = 0.0;
  double error = 0.0;  // standard error of the mean
};

struct EnergyEstimate {
  Estimate mixed;  // E1: trajectories and waves
  Estimate wave;   // E2: waves only
};

/// Walker average of the local energy
///   sum_i [-phi''/(2 phi) + V_en](x_i^k) + sum_{i>j} V_ee(x_i^k, x_j^k).
/// Wave values at walkers use exact trigonometric interpolation.
Estimate energy_mixed(const TdqmcEnsemble& ensemble, const SystemSpec& system);

/// Walker average of
///   sum_i [ (1/2) int |phi'|^2 + int V_en |phi|^2 ]
///   + sum_{i>j} int V_ee(x_i^k, x) |phi_j^k(x)|^2 dx.
Estimate energy_wave(const TdqmcEnsemble& ensemble, const SystemSpec& system);

/// Per-walker terms of energy_wave (length M).
Eigen::VectorXd energy_wave_terms(const TdqmcEnsemble& ensemble,
                                  const SystemSpec& system);

struct EnergyRecord {
  int stage = 1;
  double tau = 0.0;
  double e1 = 0.0;
  double e2 = 0.0;
  double e2_stderr = 0.0;
};

struct GroundStateOptions {
  ImaginaryStepParams step;
  int stage1_steps = 600;
  double stage2_tol = 1e-7;
  int stage2_max_steps = 5000;
  /// Energies are recorded (and stage 2 convergence tested) every
  /// `record_stride` steps.
  int record_stride = 10;
  std::function<void(const TdqmcEnsemble&, const EnergyRecord&)> observer;
};

struct GroundStateResult {
  EnergyEstimate energy;
  std::vector<EnergyRecord> history;
  int stage2_steps = 0;
  bool converged = false;
};

/// Stage 1 alternates imaginary-time guide-wave steps with walker
/// drift-diffusion; stage 2 freezes the walkers and relaxes the guide waves
/// until E2 changes by less than stage2_tol between records. Throws
/// NumericalError when stage 2 runs out of steps.
GroundStateResult prepare_ground_state(TdqmcEnsemble& ensemble,
                                       const SystemSpec& system,
                                       const GroundStateOptions& options);

/// Stage 1 only, for `steps` steps (used for resume and diagnostics).
void run_stage1(TdqmcEnsemble& ensemble, const SystemSpec& system,
                const ImaginaryStepParams& params, int steps);

/// Advance guide waves by dt and move each walker with Im[grad phi / phi]
/// (RK2, velocity linear in time across the step). Walkers reaching the box
/// edge are clamped and flagged. Returns the number of newly flagged walkers.
int real_time_step(TdqmcEnsemble& ensemble, const SystemSpec& system,
                   const FieldSpec& fields, double dt);

/// Mean walker position per electron with its standard error.
std::vector<Estimate> tdqmc_dipole(const TdqmcEnsemble& ensemble);

/// (1/M) sum_k int x |phi_i^k|^2 dx per electron.
std::vector<double> wave_dipole(const TdqmcEnsemble& ensemble);

/// Evaluation of a grid function's trigonometric interpolant.
struct SpectralSample {
  Complex value;
  Complex d1;
  Complex d2;
};

/// `spectrum` is the forward FFT of the samples divided by n.
SpectralSample spectral_sample(const Eigen::VectorXcd& spectrum,
                               const Grid1D& grid, double x);

}  // namespace qnl

#endif  // QNL_TDQMC_HPP
