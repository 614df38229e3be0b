#include "qnl/spectral2d.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <sstream>

namespace qnl {
namespace {

constexpr Complex kI{0.0, 1.0};

// Spectral derivative wavenumbers with the unpaired Nyquist mode zeroed, so
// that derivatives of real functions stay real.
Eigen::ArrayXd derivative_wavenumbers(const Grid1D& g) {
  Eigen::ArrayXd k = g.wavenumbers();
  k(g.size() / 2) = 0.0;
  return k;
}

ComplexGrid static_potential(const Grid2D& grid, const SystemSpec& system) {
  const Eigen::ArrayXd x1 = grid.axis1.points();
  const Eigen::ArrayXd x2 = grid.axis2.points();
  const Eigen::ArrayXd v1 = confinement_potential(x1, system);
  const Eigen::ArrayXd v2 = confinement_potential(x2, system);
  ComplexGrid v(x1.size(), x2.size());
  for (Eigen::Index i = 0; i < x1.size(); ++i) {
    const Eigen::ArrayXd vee = soft_core_potential(x2, x1(i), system);
    v.row(i) = (v1(i) + v2 + vee).transpose().cast<Complex>();
  }
  return v;
}

struct Interp {
  Eigen::Index i0, j0;
  double f1, f2;
};

// Bilinear cell lookup, clamped to the grid.
Interp locate(const Grid2D& grid, const Point2& p) {
  auto axis = [](const Grid1D& g, double x, Eigen::Index& idx, double& frac) {
    double s = (x - g.lower()) / g.spacing();
    s = std::clamp(s, 0.0, double(g.size() - 1));
    idx = std::min<Eigen::Index>(static_cast<Eigen::Index>(s), g.size() - 2);
    frac = s - double(idx);
  };
  Interp r{};
  axis(grid.axis1, p[0], r.i0, r.f1);
  axis(grid.axis2, p[1], r.j0, r.f2);
  return r;
}

double bilinear(const RealGrid& a, const Interp& c) {
  return (1 - c.f1) * (1 - c.f2) * a(c.i0, c.j0) +
         c.f1 * (1 - c.f2) * a(c.i0 + 1, c.j0) +
         (1 - c.f1) * c.f2 * a(c.i0, c.j0 + 1) +
         c.f1 * c.f2 * a(c.i0 + 1, c.j0 + 1);
}

}  // namespace

void WaveFunction2D::normalize() {
  const double n = norm();
  if (!(n > 0.0) || !std::isfinite(n))
    throw NumericalError("cannot normalise wave function with norm " +
                         std::to_string(n));
  amplitudes /= std::sqrt(n);
}

double WaveFunction2D::mean_position(int electron) const {
  const RealGrid rho = amplitudes.abs2();
  const double area = grid.cell_area();
  if (electron == 0)
    return (rho.rowwise().sum() * grid.axis1.points()).sum() * area;
  return (rho.colwise().sum().transpose() * grid.axis2.points()).sum() * area;
}

double WaveFunction2D::mean_square(int electron) const {
  const RealGrid rho = amplitudes.abs2();
  const double area = grid.cell_area();
  if (electron == 0)
    return (rho.rowwise().sum() * grid.axis1.points().square()).sum() * area;
  return (rho.colwise().sum().transpose() * grid.axis2.points().square())
             .sum() *
         area;
}

double WaveFunction2D::edge_probability(int strip) const {
  const Eigen::Index n1 = amplitudes.rows(), n2 = amplitudes.cols();
  const RealGrid rho = amplitudes.abs2();
  const Eigen::Index inner1 = n1 - 2 * strip, inner2 = n2 - 2 * strip;
  if (inner1 <= 0 || inner2 <= 0) return rho.sum() * grid.cell_area();
  const double interior = rho.block(strip, strip, inner1, inner2).sum();
  return (rho.sum() - interior) * grid.cell_area();
}

double WaveFunction2D::exchange_asymmetry() const {
  if (amplitudes.rows() != amplitudes.cols())
    throw ValidationError("exchange asymmetry needs a square grid");
  const ComplexGrid swapped = amplitudes.transpose();
  return std::sqrt((amplitudes - swapped).abs2().sum() * grid.cell_area());
}

void PropagationSchedule::validate() const {
  if (!(dt > 0.0)) throw ValidationError("schedule.dt must be > 0");
  if (n_steps < 0) throw ValidationError("schedule.n_steps must be >= 0");
  if (snapshot_stride < 1)
    throw ValidationError("schedule.snapshot_stride must be >= 1");
}

SplitStep2D::SplitStep2D(const Grid2D& grid, const SystemSpec& system,
                         const FieldSpec& fields, TimeMode mode, double dt)
    : grid_(grid),
      fields_(fields),
      mode_(mode),
      dt_(dt),
      x1_(grid.axis1.points()),
      x2_(grid.axis2.points()),
      plan_(FftPlan::rowmajor2d(grid.axis1.size(), grid.axis2.size())) {
  system.validate();
  fields.validate();
  if (!(dt > 0.0)) throw ValidationError("time step must be > 0");

  // exp(-i H dt) in real time, exp(-H dtau) in imaginary time.
  const Complex rate = mode == TimeMode::real ? -kI * dt : Complex(-dt);
  half_potential_ = (0.5 * rate * static_potential(grid, system)).exp();

  const Eigen::ArrayXd k1 = grid.axis1.wavenumbers();
  const Eigen::ArrayXd k2 = grid.axis2.wavenumbers();
  const double scale = 1.0 / double(grid.size());
  kinetic_.resize(k1.size(), k2.size());
  for (Eigen::Index i = 0; i < k1.size(); ++i)
    kinetic_.row(i) =
        (rate * 0.5 * (k1(i) * k1(i) + k2.square())).exp().transpose() *
        scale;
}

void SplitStep2D::advance(WaveFunction2D& psi) const {
  if (!(psi.grid == grid_))
    throw ValidationError("wave function grid does not match propagator");
  auto& a = psi.amplitudes;
  const double t_mid = psi.time + 0.5 * dt_;

  // Dipole phase for the half step: exp(rate/2 * (-E1 x1 - E2 x2)).
  const double e1 = field_value(t_mid, 0, fields_);
  const double e2 = field_value(t_mid, 1, fields_);
  const bool driven = e1 != 0.0 || e2 != 0.0;
  Eigen::ArrayXcd f1, f2;
  if (driven) {
    const Complex rate = mode_ == TimeMode::real ? -kI * dt_ : Complex(-dt_);
    f1 = (-0.5 * rate * e1 * x1_).exp();
    f2 = (-0.5 * rate * e2 * x2_).exp();
  }
  auto apply_potential = [&] {
    a *= half_potential_;
    if (driven) {
      a.colwise() *= f1;
      a.rowwise() *= f2.transpose();
    }
  };

  apply_potential();
  plan_.forward(a.data());
  a *= kinetic_;
  plan_.backward(a.data());
  apply_potential();
  psi.time += dt_;

  const double norm = psi.norm();
  if (!std::isfinite(norm)) {
    std::ostringstream msg;
    msg << "non-finite wave function at t=" << psi.time;
    throw NumericalError(msg.str());
  }
  if (mode_ == TimeMode::imaginary) a /= std::sqrt(norm);
}

WaveFunction2D init_gaussian(const Grid2D& grid, double width) {
  if (!(width > 0.0)) throw ValidationError("Gaussian width must be > 0");
  const Eigen::ArrayXd g1 =
      (-grid.axis1.points().square() / (2 * width * width)).exp();
  const Eigen::ArrayXd g2 =
      (-grid.axis2.points().square() / (2 * width * width)).exp();
  WaveFunction2D psi(grid);
  psi.amplitudes = (g1.matrix() * g2.matrix().transpose()).array().cast<Complex>();
  psi.normalize();
  return psi;
}

WaveFunction2D split_step(WaveFunction2D psi, const SystemSpec& system,
                          const FieldSpec& fields, double dt, TimeMode mode) {
  SplitStep2D(psi.grid, system, fields, mode, dt).advance(psi);
  return psi;
}

Hamiltonian2D::Hamiltonian2D(const Grid2D& grid, const SystemSpec& system)
    : grid_(grid),
      potential_(static_potential(grid, system).real()),
      plan_(FftPlan::rowmajor2d(grid.axis1.size(), grid.axis2.size())) {
  const Eigen::ArrayXd k1 = grid.axis1.wavenumbers();
  const Eigen::ArrayXd k2 = grid.axis2.wavenumbers();
  kinetic_.resize(k1.size(), k2.size());
  for (Eigen::Index i = 0; i < k1.size(); ++i)
    kinetic_.row(i) = (0.5 * (k1(i) * k1(i) + k2.square())).transpose() /
                      double(grid.size());
}

Complex Hamiltonian2D::expectation(const WaveFunction2D& psi,
                                   const FieldSpec& fields, double t) const {
  if (!(psi.grid == grid_))
    throw ValidationError("wave function grid does not match Hamiltonian");
  ComplexGrid h = psi.amplitudes;
  plan_.forward(h.data());
  h *= kinetic_;
  plan_.backward(h.data());
  h += potential_ * psi.amplitudes;

  const double e1 = field_value(t, 0, fields), e2 = field_value(t, 1, fields);
  if (e1 != 0.0 || e2 != 0.0) {
    RealGrid vext(psi.amplitudes.rows(), psi.amplitudes.cols());
    const Eigen::ArrayXd x1 = grid_.axis1.points(), x2 = grid_.axis2.points();
    for (Eigen::Index i = 0; i < x1.size(); ++i)
      vext.row(i) = -(e1 * x1(i) + e2 * x2).transpose();
    h += vext * psi.amplitudes;
  }
  return (psi.amplitudes.conjugate() * h).sum() * grid_.cell_area();
}

Complex hamiltonian_expectation(const WaveFunction2D& psi,
                                const SystemSpec& system,
                                const FieldSpec& fields, double t) {
  return Hamiltonian2D(psi.grid, system).expectation(psi, fields, t);
}

double energy_expectation(const WaveFunction2D& psi, const SystemSpec& system) {
  return hamiltonian_expectation(psi, system).real();
}

RelaxResult relax_ground_state(WaveFunction2D psi0, const SystemSpec& system,
                               double dtau, double energy_tol,
                               const RelaxOptions& options) {
  if (options.check_stride < 1)
    throw ValidationError("check_stride must be >= 1");
  const SplitStep2D stepper(psi0.grid, system, {}, TimeMode::imaginary, dtau);
  const Hamiltonian2D hamiltonian(psi0.grid, system);
  RelaxResult r{std::move(psi0)};
  r.psi.normalize();
  double previous = hamiltonian.energy(r.psi);
  r.energy = previous;
  if (options.observer) options.observer(r.psi, previous);

  while (r.steps < options.max_steps) {
    stepper.advance(r.psi);
    ++r.steps;
    if (r.steps % options.check_stride != 0) continue;
    r.energy = hamiltonian.energy(r.psi);
    r.energy_trace.push_back(r.energy);
    if (options.observer) options.observer(r.psi, r.energy);
    if (std::abs(r.energy - previous) < energy_tol) {
      r.converged = true;
      return r;
    }
    previous = r.energy;
  }
  if (options.throw_on_budget) {
    std::ostringstream msg;
    msg << "imaginary-time relaxation did not converge in " << r.steps
        << " steps (last energy " << r.energy << ")";
    throw NumericalError(msg.str());
  }
  return r;
}

RealTimeRun propagate_real(WaveFunction2D psi, const SystemSpec& system,
                           const FieldSpec& fields,
                           const PropagationSchedule& schedule,
                           const RealTimeOptions& options) {
  schedule.validate();
  if (schedule.mode != TimeMode::real)
    throw ValidationError("propagate_real needs a real-time schedule");
  const SplitStep2D stepper(psi.grid, system, fields, TimeMode::real,
                            schedule.dt);
  const int strip = options.edge_strip > 0
                        ? options.edge_strip
                        : std::max(1, psi.grid.axis1.size() / 16);

  RealTimeRun run{psi};
  auto record = [&](const WaveFunction2D& s) {
    const double edge = s.edge_probability(strip);
    if (edge > options.edge_limit) {
      std::ostringstream msg;
      msg << "edge probability " << edge << " exceeds " << options.edge_limit
          << " at t=" << s.time << "; enlarge the box";
      throw NumericalError(msg.str());
    }
    run.dipoles.push(s.time, s.mean_position(0), s.mean_position(1));
    if (options.keep_snapshots) run.snapshots.push_back(s);
    if (options.observer) options.observer(s);
  };

  record(psi);
  for (int step = 1; step <= schedule.n_steps; ++step) {
    stepper.advance(psi);
    if (step % schedule.snapshot_stride == 0) record(psi);
  }
  run.final_state = std::move(psi);
  return run;
}

VelocityField::VelocityField(const WaveFunction2D& psi)
    : grid(psi.grid), time(psi.time) {
  const Eigen::Index n1 = psi.amplitudes.rows(), n2 = psi.amplitudes.cols();
  const auto plan = FftPlan::rowmajor2d(int(n1), int(n2));
  const Eigen::ArrayXd k1 = derivative_wavenumbers(grid.axis1);
  const Eigen::ArrayXd k2 = derivative_wavenumbers(grid.axis2);

  ComplexGrid spectrum = psi.amplitudes;
  plan.forward(spectrum.data());
  spectrum /= double(n1 * n2);

  ComplexGrid d1 = spectrum;
  d1.colwise() *= (kI * k1).eval();
  plan.backward(d1.data());
  ComplexGrid d2 = spectrum;
  d2.rowwise() *= (kI * k2).transpose().eval();
  plan.backward(d2.data());

  density = psi.amplitudes.abs2();
  current1 = (psi.amplitudes.conjugate() * d1).imag();
  current2 = (psi.amplitudes.conjugate() * d2).imag();
  density_max = density.maxCoeff();
}

BohmVelocity bohm_velocity(const VelocityField& field, const Point2& point) {
  const Interp c = locate(field.grid, point);
  const double rho = bilinear(field.density, c);
  if (!(rho >= kNodeGuard * field.density_max) || rho <= 0.0)
    return {0.0, 0.0, true};
  return {bilinear(field.current1, c) / rho, bilinear(field.current2, c) / rho,
          false};
}

BohmVelocity bohm_velocity(const WaveFunction2D& psi, const Point2& point) {
  return bohm_velocity(VelocityField(psi), point);
}

TrajectoryIntegrator::TrajectoryIntegrator(std::vector<Point2> starts)
    : current_(std::move(starts)),
      last_velocity_(current_.size(), {0.0, 0.0}),
      stopped_(current_.size(), 0) {
  const auto k = Eigen::Index(current_.size());
  set_.x1.resize(0, k);
  set_.x2.resize(0, k);
  set_.terminated.assign(current_.size(), false);
  set_.guarded_samples.assign(current_.size(), 0);
}

void TrajectoryIntegrator::push(const WaveFunction2D& snapshot) {
  auto next = std::make_unique<VelocityField>(snapshot);
  const auto k = Eigen::Index(current_.size());

  if (previous_) {
    const double h = next->time - previous_->time;
    if (!(h > 0.0))
      throw ValidationError("snapshot times must be strictly increasing");
    const VelocityField& a = *previous_;
    const VelocityField& b = *next;
    const Grid2D& g = b.grid;

#pragma omp parallel for schedule(static)
    for (Eigen::Index j = 0; j < k; ++j) {
      if (stopped_[j]) continue;
      Point2& x = current_[j];
      Point2& last = last_velocity_[j];
      auto eval = [&](const VelocityField& f, const Point2& p) {
        BohmVelocity v = bohm_velocity(f, p);
        if (v.guarded) {
          ++set_.guarded_samples[j];
          return Point2{last[0], last[1]};
        }
        return Point2{v.v1, v.v2};
      };
      const Point2 va = eval(a, x);
      const Point2 half{x[0] + 0.5 * h * va[0], x[1] + 0.5 * h * va[1]};
      const Point2 vha = eval(a, half), vhb = eval(b, half);
      const Point2 vmid{0.5 * (vha[0] + vhb[0]), 0.5 * (vha[1] + vhb[1])};
      const Point2 moved{x[0] + h * vmid[0], x[1] + h * vmid[1]};
      last = vmid;
      if (!g.axis1.contains(moved[0]) || !g.axis2.contains(moved[1])) {
        stopped_[j] = 1;
        continue;
      }
      x = moved;
    }
  }

  for (Eigen::Index j = 0; j < k; ++j) set_.terminated[j] = stopped_[j] != 0;
  const Eigen::Index row = set_.x1.rows();
  set_.x1.conservativeResize(row + 1, k);
  set_.x2.conservativeResize(row + 1, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    set_.x1(row, j) = current_[j][0];
    set_.x2(row, j) = current_[j][1];
  }
  set_.times.push_back(snapshot.time);
  previous_ = std::move(next);
}

TrajectorySet evolve_trajectories(std::span<const WaveFunction2D> snapshots,
                                  std::vector<Point2> starts) {
  TrajectoryIntegrator integrator(std::move(starts));
  for (const auto& s : snapshots) integrator.push(s);
  return integrator.result();
}

std::vector<Point2> sample_density(const WaveFunction2D& psi, int count,
                                   RngStream& rng) {
  if (count < 1) throw ValidationError("sample count must be >= 1");
  const RealGrid rho = psi.amplitudes.abs2();
  const Eigen::ArrayXd marginal = rho.rowwise().sum();
  std::vector<double> cdf1(marginal.size());
  std::partial_sum(marginal.begin(), marginal.end(), cdf1.begin());

  const Grid1D& g1 = psi.grid.axis1;
  const Grid1D& g2 = psi.grid.axis2;
  std::vector<Point2> out;
  out.reserve(count);
  std::vector<double> cdf2(rho.cols());
  for (int s = 0; s < count; ++s) {
    const double u1 = rng.uniform() * cdf1.back();
    const auto i = std::min<Eigen::Index>(
        std::upper_bound(cdf1.begin(), cdf1.end(), u1) - cdf1.begin(),
        rho.rows() - 1);
    std::partial_sum(rho.row(i).begin(), rho.row(i).end(), cdf2.begin());
    const double u2 = rng.uniform() * cdf2.back();
    const auto j = std::min<Eigen::Index>(
        std::upper_bound(cdf2.begin(), cdf2.end(), u2) - cdf2.begin(),
        rho.cols() - 1);
    const double x1 = g1.point(int(i)) + (rng.uniform() - 0.5) * g1.spacing();
    const double x2 = g2.point(int(j)) + (rng.uniform() - 0.5) * g2.spacing();
    out.push_back({std::clamp(x1, g1.lower(), g1.upper()),
                   std::clamp(x2, g2.lower(), g2.upper())});
  }
  return out;
}

namespace {

void require_same_axis(const std::vector<double>& a,
                       const std::vector<double>& b) {
  if (a.size() != b.size())
    throw ValidationError("reference subtraction: time axes differ in length");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > 1e-9 * std::max(1.0, std::abs(a[i])))
      throw ValidationError("reference subtraction: time axes differ");
}

}  // namespace

DipoleSeries subtract_reference(const DipoleSeries& a, const DipoleSeries& b) {
  require_same_axis(a.times, b.times);
  DipoleSeries r;
  for (std::size_t i = 0; i < a.size(); ++i)
    r.push(a.times[i], a.d1[i] - b.d1[i], a.d2[i] - b.d2[i]);
  return r;
}

TrajectorySet subtract_reference(const TrajectorySet& a,
                                 const TrajectorySet& b) {
  require_same_axis(a.times, b.times);
  if (a.count() != b.count())
    throw ValidationError("reference subtraction: trajectory counts differ");
  TrajectorySet r = a;
  r.x1 -= b.x1;
  r.x2 -= b.x2;
  for (std::size_t j = 0; j < r.terminated.size(); ++j) {
    r.terminated[j] = a.terminated[j] || b.terminated[j];
    r.guarded_samples[j] = a.guarded_samples[j] + b.guarded_samples[j];
  }
  return r;
}

}  // namespace qnl
