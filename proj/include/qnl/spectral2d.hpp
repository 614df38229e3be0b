// Numerically exact two-body solver: split-step Fourier propagation of
// Psi(x1, x2, t) in real and imaginary time, Bohmian trajectories guided by
// the two-body wave function, dipole monitoring and reference subtraction.
#ifndef QNL_SPECTRAL2D_HPP
#define QNL_SPECTRAL2D_HPP

#include <array>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "qnl/fft.hpp"
#include "qnl/model.hpp"

namespace qnl {

/// Row index <-> x1, column index <-> x2.
using ComplexGrid =
    Eigen::Array<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RealGrid =
    Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class TimeMode { real, imaginary };

struct WaveFunction2D {
  Grid2D grid;
  ComplexGrid amplitudes;
  /// Real time, or accumulated tau for imaginary-time states.
  double time = 0.0;

  explicit WaveFunction2D(const Grid2D& g)
      : grid(g), amplitudes(ComplexGrid::Zero(g.axis1.size(), g.axis2.size())) {}

  double norm() const { return amplitudes.abs2().sum() * grid.cell_area(); }
  void normalize();
  bool all_finite() const { return amplitudes.allFinite(); }

  /// <x_i> for electron 0 or 1.
  double mean_position(int electron) const;
  double mean_square(int electron) const;
  /// Probability within `strip` cells of any box edge.
  double edge_probability(int strip) const;
  /// ||Psi(x1,x2) - Psi(x2,x1)||, requires a square grid.
  double exchange_asymmetry() const;
};

struct PropagationSchedule {
  double dt = 0.001;
  int n_steps = 0;
  int snapshot_stride = 1;
  TimeMode mode = TimeMode::real;

  void validate() const;
};

struct DipoleSeries {
  std::vector<double> times;
  std::vector<double> d1;
  std::vector<double> d2;

  std::size_t size() const { return times.size(); }
  void push(double t, double a, double b) {
    times.push_back(t);
    d1.push_back(a);
    d2.push_back(b);
  }
};

using Point2 = std::array<double, 2>;

/// Positions of K trajectories sampled on a shared time axis. Row = time,
/// column = trajectory.
struct TrajectorySet {
  std::vector<double> times;
  Eigen::MatrixXd x1;
  Eigen::MatrixXd x2;
  /// Trajectory left the grid; its position is frozen from then on.
  std::vector<bool> terminated;
  /// Number of node-guarded velocity evaluations per trajectory.
  std::vector<int> guarded_samples;

  Eigen::Index count() const { return x1.cols(); }
};

/// Pre-computed Strang propagator for one (grid, potentials, mode, dt)
/// combination.
class SplitStep2D {
 public:
  SplitStep2D(const Grid2D& grid, const SystemSpec& system,
              const FieldSpec& fields, TimeMode mode, double dt);

  /// One step from psi.time to psi.time + dt. Imaginary mode renormalises.
  /// Throws NumericalError if the state stops being finite.
  void advance(WaveFunction2D& psi) const;

  TimeMode mode() const { return mode_; }
  double dt() const { return dt_; }

 private:
  Grid2D grid_;
  FieldSpec fields_;
  TimeMode mode_;
  double dt_;
  Eigen::ArrayXd x1_;
  Eigen::ArrayXd x2_;
  ComplexGrid half_potential_;  // static part, one half-step
  ComplexGrid kinetic_;         // includes the 1/(n1 n2) FFT normalisation
  FftPlan plan_;
};

/// Normalised product Gaussian exp(-(x1^2 + x2^2) / (2 w^2)).
WaveFunction2D init_gaussian(const Grid2D& grid, double width);

/// One Strang step with a freshly built propagator. Prefer SplitStep2D in
/// loops.
WaveFunction2D split_step(WaveFunction2D psi, const SystemSpec& system,
                          const FieldSpec& fields, double dt, TimeMode mode);

/// Cached Hamiltonian pieces for repeated expectation values on one grid.
class Hamiltonian2D {
 public:
  Hamiltonian2D(const Grid2D& grid, const SystemSpec& system);

  /// Raw <Psi|H|Psi>, field evaluated at time t.
  Complex expectation(const WaveFunction2D& psi, const FieldSpec& fields = {},
                      double t = 0.0) const;
  double energy(const WaveFunction2D& psi) const {
    return expectation(psi).real();
  }

 private:
  Grid2D grid_;
  RealGrid potential_;
  RealGrid kinetic_;  // k^2/2 with the FFT normalisation folded in
  FftPlan plan_;
};

/// <Psi|H|Psi> before discarding the imaginary part. The external field is
/// evaluated at time t.
Complex hamiltonian_expectation(const WaveFunction2D& psi,
                                const SystemSpec& system,
                                const FieldSpec& fields = {}, double t = 0.0);

double energy_expectation(const WaveFunction2D& psi, const SystemSpec& system);

struct RelaxOptions {
  int check_stride = 10;
  int max_steps = 200000;
  /// If false, running out of steps returns the unconverged state instead
  /// of throwing (used for checkpoint/resume).
  bool throw_on_budget = true;
  /// Called with the state at every energy check.
  std::function<void(const WaveFunction2D&, double energy)> observer;
};

struct RelaxResult {
  WaveFunction2D psi;
  double energy = 0.0;
  int steps = 0;
  bool converged = false;
  /// Energy at every check.
  std::vector<double> energy_trace;
};

/// Imaginary-time relaxation until |E(n) - E(n - check_stride)| < energy_tol.
RelaxResult relax_ground_state(WaveFunction2D psi0, const SystemSpec& system,
                               double dtau, double energy_tol,
                               const RelaxOptions& options = {});

struct RealTimeRun {
  WaveFunction2D final_state;
  std::vector<WaveFunction2D> snapshots;
  DipoleSeries dipoles;
};

struct RealTimeOptions {
  bool keep_snapshots = true;
  /// Abort when the probability within `edge_strip` cells of the box edge
  /// exceeds this bound. A strip of 0 means size/16.
  double edge_limit = 1e-6;
  int edge_strip = 0;
  std::function<void(const WaveFunction2D&)> observer;
};

/// Real-time evolution; the external field is sampled at mid-step times.
/// Snapshots and dipoles are recorded at step 0 and every snapshot_stride
/// steps.
RealTimeRun propagate_real(WaveFunction2D psi, const SystemSpec& system,
                           const FieldSpec& fields,
                           const PropagationSchedule& schedule,
                           const RealTimeOptions& options = {});

/// Density and probability current on the grid, ready for interpolation.
struct VelocityField {
  Grid2D grid;
  double time = 0.0;
  RealGrid density;
  RealGrid current1;
  RealGrid current2;
  double density_max = 0.0;

  explicit VelocityField(const WaveFunction2D& psi);
};

struct BohmVelocity {
  double v1 = 0.0;
  double v2 = 0.0;
  /// |Psi|^2 fell below node_guard * max|Psi|^2; velocities are zero and
  /// the caller should reuse its previous value.
  bool guarded = false;
};

inline constexpr double kNodeGuard = 1e-12;

/// Im[grad Psi / Psi] at an off-grid point: j / rho with both bilinearly
/// interpolated.
BohmVelocity bohm_velocity(const VelocityField& field, const Point2& point);
BohmVelocity bohm_velocity(const WaveFunction2D& psi, const Point2& point);

/// Streaming RK2 trajectory integrator. The first pushed snapshot fixes the
/// start time; each further push integrates over the interval since the
/// previous snapshot, with the velocity linear in time between the two.
class TrajectoryIntegrator {
 public:
  explicit TrajectoryIntegrator(std::vector<Point2> starts);

  void push(const WaveFunction2D& snapshot);
  const TrajectorySet& result() const { return set_; }

 private:
  std::vector<Point2> current_;
  std::vector<Point2> last_velocity_;
  std::vector<unsigned char> stopped_;
  std::unique_ptr<VelocityField> previous_;
  TrajectorySet set_;
};

TrajectorySet evolve_trajectories(std::span<const WaveFunction2D> snapshots,
                                  std::vector<Point2> starts);

/// K points distributed as |Psi|^2: marginal in x1, then conditional in x2,
/// with a uniform offset inside the selected cell.
std::vector<Point2> sample_density(const WaveFunction2D& psi, int count,
                                   RngStream& rng);

DipoleSeries subtract_reference(const DipoleSeries& a, const DipoleSeries& b);
TrajectorySet subtract_reference(const TrajectorySet& a,
                                 const TrajectorySet& b);

}  // namespace qnl

#endif  // QNL_SPECTRAL2D_HPP
