#include "qnl/tdqmc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace qnl {
namespace {

constexpr Complex kI{0.0, 1.0};
// Columns per GEMM / OpenMP work item. Fixed so results never depend on the
// thread count.
constexpr int kBlock = 64;

int block_count(int m) { return (m + kBlock - 1) / kBlock; }

// Forward transforms of every column, divided by n.
Eigen::MatrixXcd spectra(const Eigen::MatrixXcd& waves, const FftPlan& plan) {
  Eigen::MatrixXcd out = waves;
  const double inv = 1.0 / double(waves.rows());
  const int m = int(waves.cols());
#pragma omp parallel for schedule(static)
  for (int k = 0; k < m; ++k) {
    plan.forward(out.col(k).data());
    out.col(k) *= inv;
  }
  return out;
}

// Reflect once at each end, then clamp whatever is still outside.
double reflect(double x, const Grid1D& g) {
  if (x < g.lower()) x = 2 * g.lower() - x;
  if (x > g.upper()) x = 2 * g.upper() - x;
  return std::clamp(x, g.lower(), g.upper());
}

// Im or Re of phi'/phi at x; `ok` is false near a node.
struct LogDerivative {
  Complex value;
  bool ok;
};

LogDerivative log_derivative(const Eigen::VectorXcd& spectrum, const Grid1D& g,
                             double x, double max_density) {
  const SpectralSample s = spectral_sample(spectrum, g, x);
  const double rho = std::norm(s.value);
  if (!(rho > kNodeGuard * max_density)) return {Complex{}, false};
  return {s.d1 * std::conj(s.value) / rho, true};
}

Eigen::VectorXd max_densities(const Eigen::MatrixXcd& waves) {
  return waves.cwiseAbs2().colwise().maxCoeff().transpose();
}

Eigen::ArrayXd full_k2(const Grid1D& g) { return g.wavenumbers().square(); }

}  // namespace

void TdqmcEnsemble::validate() const {
  if (electrons.empty()) throw ValidationError("ensemble has no electrons");
  const int m = walker_count();
  if (m < 1) throw ValidationError("ensemble needs at least one walker");
  for (const auto& e : electrons) {
    if (e.walkers.size() != m || e.waves.cols() != m ||
        e.waves.rows() != grid.size() || int(e.rng.size()) != m ||
        e.velocity.size() != m || int(e.edge_flags.size()) != m)
      throw ValidationError("inconsistent ensemble dimensions");
    if (!(e.sigma > 0.0) || !std::isfinite(e.sigma))
      throw ValidationError("sigma must be positive, got " +
                            std::to_string(e.sigma));
    if (!e.walkers.allFinite() || !e.waves.allFinite())
      throw NumericalError("ensemble contains non-finite values");
  }
}

TdqmcEnsemble init_ensemble(int walkers, double width, const Grid1D& grid,
                            const std::vector<double>& sigmas,
                            std::uint64_t master_seed) {
  if (walkers < 1) throw ValidationError("walker count must be >= 1");
  if (!(width > 0.0)) throw ValidationError("initial width must be positive");
  if (sigmas.empty()) throw ValidationError("need one sigma per electron");

  const Eigen::ArrayXd x = grid.points();
  Eigen::VectorXcd wave =
      (-x.square() / (2 * width * width)).exp().cast<Complex>().matrix();
  wave /= std::sqrt(wave.squaredNorm() * grid.spacing());

  TdqmcEnsemble ens{grid, {}, master_seed, 0.0, TimeMode::imaginary};
  for (int i = 0; i < int(sigmas.size()); ++i) {
    ElectronEnsemble e;
    e.sigma = sigmas[i];
    e.waves = wave.replicate(1, walkers);
    e.walkers.resize(walkers);
    e.velocity = Eigen::VectorXd::Zero(walkers);
    e.edge_flags.assign(walkers, 0);
    e.rng.reserve(walkers);
    for (int k = 0; k < walkers; ++k) {
      e.rng.emplace_back(master_seed, walker_stream(i, k));
      double xk;
      do {
        xk = width / std::numbers::sqrt2 * e.rng.back().normal();
      } while (!grid.contains(xk));
      e.walkers(k) = xk;
    }
    ens.electrons.push_back(std::move(e));
  }
  ens.validate();
  return ens;
}

double kernel_weight(double x, double x_ref, double sigma) {
  if (!(sigma > 0.0))
    throw ValidationError("sigma must be positive, got " +
                          std::to_string(sigma));
  const double d = x - x_ref;
  return std::exp(-d * d / (2 * sigma * sigma));
}

Eigen::VectorXd effective_potential(const TdqmcEnsemble& ens,
                                    const SystemSpec& system, int electron,
                                    int walker) {
  const Eigen::ArrayXd x = ens.grid.points();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(x.size());
  if (!system.interaction_on) return v;
  for (int j = 0; j < ens.electron_count(); ++j) {
    if (j == electron) continue;
    const auto& other = ens.electrons[j];
    const double xk = other.walkers(walker);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(x.size());
    double z = 0.0;
    for (int l = 0; l < other.walkers.size(); ++l) {
      const double w = kernel_weight(other.walkers(l), xk, other.sigma);
      if (w == 0.0) continue;
      acc += w * soft_core_potential(x, other.walkers(l), system).matrix();
      z += w;
    }
    v += acc / z;
  }
  return v;
}

Eigen::MatrixXd effective_potentials(const TdqmcEnsemble& ens,
                                     const SystemSpec& system, int electron) {
  const int n = ens.grid.size();
  const int m = ens.walker_count();
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(n, m);
  if (!system.interaction_on) return v;
  const Eigen::ArrayXd x = ens.grid.points();

  for (int j = 0; j < ens.electron_count(); ++j) {
    if (j == electron) continue;
    const auto& other = ens.electrons[j];
    if (!(other.sigma > 0.0))
      throw ValidationError("sigma must be positive, got " +
                            std::to_string(other.sigma));
    const Eigen::VectorXd& xs = other.walkers;
    const double inv2s2 = 1.0 / (2 * other.sigma * other.sigma);

    Eigen::MatrixXd g(n, m);
    Eigen::MatrixXd kern(m, m);
#pragma omp parallel for schedule(static)
    for (int l = 0; l < m; ++l) {
      g.col(l) = soft_core_potential(x, xs(l), system).matrix();
      kern.col(l) = (-(xs.array() - xs(l)).square() * inv2s2).exp().matrix();
    }
    const Eigen::RowVectorXd z = kern.colwise().sum();

#pragma omp parallel for schedule(static)
    for (int b = 0; b < block_count(m); ++b) {
      const int c0 = b * kBlock;
      const int w = std::min(kBlock, m - c0);
      Eigen::MatrixXd part = g * kern.middleCols(c0, w);
      for (int c = 0; c < w; ++c) v.col(c0 + c) += part.col(c) / z(c0 + c);
    }
  }
  return v;
}

GuideWaveStepper::GuideWaveStepper(const Grid1D& grid,
                                   const SystemSpec& system, TimeMode mode,
                                   double dt)
    : grid_(grid),
      mode_(mode),
      dt_(dt),
      x_(grid.points()),
      confinement_(confinement_potential(grid.points(), system)),
      plan_(FftPlan::batch1d(grid.size(), 1)) {
  if (!(dt > 0.0)) throw ValidationError("time step must be positive");
  system.validate();
  const Eigen::ArrayXd t = 0.5 * full_k2(grid) * dt;
  const double inv = 1.0 / grid.size();
  if (mode == TimeMode::real)
    kinetic_ = (-kI * t).exp() * inv;
  else
    kinetic_ = (-t).exp().cast<Complex>() * inv;
}

void GuideWaveStepper::advance(Eigen::MatrixXcd& waves,
                               const Eigen::MatrixXd& veff,
                               double field) const {
  const int m = int(waves.cols());
  if (waves.rows() != grid_.size() || veff.rows() != waves.rows() ||
      veff.cols() != m)
    throw ValidationError("guide waves and potentials do not match");
  const Eigen::ArrayXd base = confinement_ - field * x_;
  const double dx = grid_.spacing();
  bool finite = true;

#pragma omp parallel for schedule(static) reduction(&& : finite)
  for (int k = 0; k < m; ++k) {
    const Eigen::ArrayXd v = base + veff.col(k).array();
    Eigen::ArrayXcd half;
    if (mode_ == TimeMode::real)
      half = (-0.5 * dt_ * kI * v.cast<Complex>()).exp();
    else
      half = (-0.5 * dt_ * v).exp().cast<Complex>();
    auto col = waves.col(k).array();
    col *= half;
    plan_.forward(waves.col(k).data());
    col *= kinetic_;
    plan_.backward(waves.col(k).data());
    col *= half;
    if (mode_ == TimeMode::imaginary) {
      const double norm = col.abs2().sum() * dx;
      if (norm > 0.0 && std::isfinite(norm))
        col /= std::sqrt(norm);
      else
        finite = false;
    } else if (!col.allFinite()) {
      finite = false;
    }
  }
  if (!finite) throw NumericalError("guide wave is no longer finite");
}

void guide_wave_step(TdqmcEnsemble& ens, const SystemSpec& system,
                     const FieldSpec& fields, int electron, double dt,
                     TimeMode mode) {
  const Eigen::MatrixXd veff = effective_potentials(ens, system, electron);
  const GuideWaveStepper stepper(ens.grid, system, mode, dt);
  stepper.advance(ens.electrons[electron].waves, veff,
                  field_value(ens.time + 0.5 * dt, electron, fields));
}

void ImaginaryStepParams::validate() const {
  if (!(dtau > 0.0)) throw ValidationError("dtau must be positive");
  if (!(diffusion >= 0.0))
    throw ValidationError("diffusion constant must be non-negative");
}

void walker_drift_diffusion_step(TdqmcEnsemble& ens,
                                 const ImaginaryStepParams& params) {
  params.validate();
  const Grid1D& g = ens.grid;
  const FftPlan plan = FftPlan::batch1d(g.size(), 1);
  const double noise = std::sqrt(2 * params.diffusion * params.dtau);
  for (auto& e : ens.electrons) {
    const int m = int(e.walkers.size());
    Eigen::MatrixXcd spec;
    Eigen::VectorXd peak;
    if (params.include_drift) {
      spec = spectra(e.waves, plan);
      peak = max_densities(e.waves);
    }
#pragma omp parallel for schedule(static)
    for (int k = 0; k < m; ++k) {
      double x = e.walkers(k);
      double drift = 0.0;
      if (params.include_drift) {
        const LogDerivative ld = log_derivative(spec.col(k), g, x, peak(k));
        if (ld.ok) drift = ld.value.real();
      }
      // Always draw, so stream consumption does not depend on D.
      const double eta = e.rng[k].normal();
      x += drift * params.dtau + noise * eta;
      e.walkers(k) = reflect(x, g);
    }
  }
}

SpectralSample spectral_sample(const Eigen::VectorXcd& c, const Grid1D& g,
                               double x) {
  const int n = g.size();
  const double dk = 2 * std::numbers::pi / g.span();
  const double s = x - g.lower();
  const Complex w = std::polar(1.0, dk * s);
  SpectralSample r{c(0), Complex{}, Complex{}};
  Complex wp = 1.0;
  for (int p = 1; p < n / 2; ++p) {
    wp *= w;
    const double k = p * dk;
    const Complex a = c(p) * wp;
    const Complex b = c(n - p) * std::conj(wp);
    r.value += a + b;
    r.d1 += kI * k * (a - b);
    r.d2 -= k * k * (a + b);
  }
  // Unpaired Nyquist mode in its real cosine form.
  const double kn = 0.5 * n * dk;
  const Complex cn = c(n / 2);
  r.value += cn * std::cos(kn * s);
  r.d1 -= cn * kn * std::sin(kn * s);
  r.d2 -= cn * kn * kn * std::cos(kn * s);
  return r;
}

Estimate energy_mixed(const TdqmcEnsemble& ens, const SystemSpec& system) {
  const Grid1D& g = ens.grid;
  const int m = ens.walker_count();
  const FftPlan plan = FftPlan::batch1d(g.size(), 1);
  Eigen::VectorXd local = Eigen::VectorXd::Zero(m);
  for (const auto& e : ens.electrons) {
    const Eigen::MatrixXcd spec = spectra(e.waves, plan);
#pragma omp parallel for schedule(static)
    for (int k = 0; k < m; ++k) {
      const double x = e.walkers(k);
      const SpectralSample s = spectral_sample(spec.col(k), g, x);
      const double kin = -0.5 * (s.d2 * std::conj(s.value)).real() /
                         std::norm(s.value);
      local(k) += kin + confinement_potential(x, system);
    }
  }
  for (int i = 0; i < ens.electron_count(); ++i)
    for (int j = 0; j < i; ++j)
      for (int k = 0; k < m; ++k)
        local(k) += soft_core_potential(ens.electrons[i].walkers(k),
                                        ens.electrons[j].walkers(k), system);
  const double mean = local.mean();
  const double var =
      m > 1 ? (local.array() - mean).square().sum() / (m - 1) : 0.0;
  return {mean, std::sqrt(var / m)};
}

Eigen::VectorXd energy_wave_terms(const TdqmcEnsemble& ens,
                                  const SystemSpec& system) {
  const Grid1D& g = ens.grid;
  const int m = ens.walker_count();
  const double dx = g.spacing();
  const Eigen::ArrayXd x = g.points();
  const Eigen::ArrayXd vconf = confinement_potential(x, system);
  const Eigen::ArrayXd k2 = full_k2(g);
  const FftPlan plan = FftPlan::batch1d(g.size(), 1);

  Eigen::VectorXd terms = Eigen::VectorXd::Zero(m);
  std::vector<Eigen::VectorXd> norms;
  for (const auto& e : ens.electrons) {
    const Eigen::MatrixXcd spec = spectra(e.waves, plan);
    const Eigen::VectorXd norm = e.waves.colwise().squaredNorm() * dx;
#pragma omp parallel for schedule(static)
    for (int k = 0; k < m; ++k) {
      // Parseval: dx sum |phi'|^2 = dx n sum |k c|^2.
      const double kin =
          0.5 * dx * g.size() * (k2 * spec.col(k).array().abs2()).sum();
      const double pot = (vconf * e.waves.col(k).array().abs2()).sum() * dx;
      terms(k) += (kin + pot) / norm(k);
    }
    norms.push_back(norm);
  }
  if (system.interaction_on) {
    for (int i = 0; i < ens.electron_count(); ++i)
      for (int j = 0; j < i; ++j) {
        const auto& wi = ens.electrons[i];
        const auto& wj = ens.electrons[j];
#pragma omp parallel for schedule(static)
        for (int k = 0; k < m; ++k) {
          const Eigen::ArrayXd vee =
              soft_core_potential(x, wi.walkers(k), system);
          terms(k) +=
              (vee * wj.waves.col(k).array().abs2()).sum() * dx / norms[j](k);
        }
      }
  }
  return terms;
}

Estimate energy_wave(const TdqmcEnsemble& ens, const SystemSpec& system) {
  const Eigen::VectorXd t = energy_wave_terms(ens, system);
  const int m = int(t.size());
  const double mean = t.mean();
  const double var = m > 1 ? (t.array() - mean).square().sum() / (m - 1) : 0.0;
  return {mean, std::sqrt(var / m)};
}

namespace {

EnergyRecord make_record(const TdqmcEnsemble& ens, const SystemSpec& system,
                         int stage) {
  const Estimate e1 = energy_mixed(ens, system);
  const Estimate e2 = energy_wave(ens, system);
  return {stage, ens.time, e1.value, e2.value, e2.error};
}

void stage1_loop(TdqmcEnsemble& ens, const SystemSpec& system,
                 const ImaginaryStepParams& params, int steps, int stride,
                 GroundStateResult* result,
                 const GroundStateOptions* options) {
  params.validate();
  ens.validate();
  ens.mode = TimeMode::imaginary;
  const GuideWaveStepper stepper(ens.grid, system, TimeMode::imaginary,
                                 params.dtau);
  const int ne = ens.electron_count();
  std::vector<Eigen::MatrixXd> veff(ne);
  for (int s = 1; s <= steps; ++s) {
    for (int i = 0; i < ne; ++i) veff[i] = effective_potentials(ens, system, i);
    for (int i = 0; i < ne; ++i)
      stepper.advance(ens.electrons[i].waves, veff[i], 0.0);
    walker_drift_diffusion_step(ens, params);
    ens.time += params.dtau;
    if (result && stride > 0 && s % stride == 0) {
      result->history.push_back(make_record(ens, system, 1));
      if (options->observer) options->observer(ens, result->history.back());
    }
  }
}

}  // namespace

void run_stage1(TdqmcEnsemble& ens, const SystemSpec& system,
                const ImaginaryStepParams& params, int steps) {
  if (steps < 0) throw ValidationError("step count must be >= 0");
  stage1_loop(ens, system, params, steps, 0, nullptr, nullptr);
}

GroundStateResult prepare_ground_state(TdqmcEnsemble& ens,
                                       const SystemSpec& system,
                                       const GroundStateOptions& options) {
  if (options.stage1_steps < 0 || options.stage2_max_steps < 1 ||
      options.record_stride < 1 || !(options.stage2_tol > 0.0))
    throw ValidationError("invalid ground-state options");
  system.validate();
  GroundStateResult result;
  stage1_loop(ens, system, options.step, options.stage1_steps,
              options.record_stride, &result, &options);

  // Stage 2: walkers frozen, effective potentials fixed.
  const int ne = ens.electron_count();
  std::vector<Eigen::MatrixXd> veff(ne);
  for (int i = 0; i < ne; ++i) veff[i] = effective_potentials(ens, system, i);
  const GuideWaveStepper stepper(ens.grid, system, TimeMode::imaginary,
                                 options.step.dtau);
  double previous = energy_wave(ens, system).value;
  for (int s = 1; s <= options.stage2_max_steps; ++s) {
    for (int i = 0; i < ne; ++i)
      stepper.advance(ens.electrons[i].waves, veff[i], 0.0);
    ens.time += options.step.dtau;
    if (s % options.record_stride != 0) continue;
    result.history.push_back(make_record(ens, system, 2));
    if (options.observer) options.observer(ens, result.history.back());
    const double e2 = result.history.back().e2;
    if (std::abs(e2 - previous) < options.stage2_tol) {
      result.stage2_steps = s;
      result.converged = true;
      break;
    }
    previous = e2;
  }
  if (!result.converged)
    throw NumericalError("stage 2 did not converge within " +
                         std::to_string(options.stage2_max_steps) + " steps");
  result.energy = {energy_mixed(ens, system), energy_wave(ens, system)};
  return result;
}

int real_time_step(TdqmcEnsemble& ens, const SystemSpec& system,
                   const FieldSpec& fields, double dt) {
  ens.validate();
  ens.mode = TimeMode::real;
  const Grid1D& g = ens.grid;
  const int ne = ens.electron_count();
  const int m = ens.walker_count();
  const FftPlan plan = FftPlan::batch1d(g.size(), 1);
  const GuideWaveStepper stepper(g, system, TimeMode::real, dt);

  std::vector<Eigen::MatrixXd> veff(ne);
  std::vector<Eigen::MatrixXcd> before(ne);
  std::vector<Eigen::VectorXd> peak_before(ne);
  for (int i = 0; i < ne; ++i) {
    veff[i] = effective_potentials(ens, system, i);
    before[i] = spectra(ens.electrons[i].waves, plan);
    peak_before[i] = max_densities(ens.electrons[i].waves);
  }
  for (int i = 0; i < ne; ++i)
    stepper.advance(ens.electrons[i].waves, veff[i],
                    field_value(ens.time + 0.5 * dt, i, fields));

  int flagged = 0;
  for (int i = 0; i < ne; ++i) {
    auto& e = ens.electrons[i];
    const Eigen::MatrixXcd after = spectra(e.waves, plan);
    const Eigen::VectorXd peak_after = max_densities(e.waves);
#pragma omp parallel for schedule(static) reduction(+ : flagged)
    for (int k = 0; k < m; ++k) {
      const double x0 = e.walkers(k);
      auto velocity = [&](const Eigen::MatrixXcd& sp, const Eigen::VectorXd& pk,
                          double x) {
        const LogDerivative ld = log_derivative(sp.col(k), g, x, pk(k));
        return ld.ok ? ld.value.imag() : e.velocity(k);
      };
      const double v0 = velocity(before[i], peak_before[i], x0);
      const double xh = std::clamp(x0 + 0.5 * dt * v0, g.lower(), g.upper());
      const double vh = 0.5 * (velocity(before[i], peak_before[i], xh) +
                               velocity(after, peak_after, xh));
      double x1 = x0 + dt * vh;
      if (!g.contains(x1)) {
        x1 = std::clamp(x1, g.lower(), g.upper());
        ++e.edge_flags[k];
        ++flagged;
      }
      e.walkers(k) = x1;
      e.velocity(k) = vh;
    }
  }
  ens.time += dt;
  return flagged;
}

std::vector<Estimate> tdqmc_dipole(const TdqmcEnsemble& ens) {
  std::vector<Estimate> out;
  for (const auto& e : ens.electrons) {
    const int m = int(e.walkers.size());
    const double mean = e.walkers.mean();
    const double var =
        m > 1 ? (e.walkers.array() - mean).square().sum() / (m - 1) : 0.0;
    out.push_back({mean, std::sqrt(var / m)});
  }
  return out;
}

std::vector<double> wave_dipole(const TdqmcEnsemble& ens) {
  const Eigen::ArrayXd x = ens.grid.points();
  std::vector<double> out;
  for (const auto& e : ens.electrons) {
    const Eigen::ArrayXXd rho = e.waves.array().abs2();
    const Eigen::ArrayXd num = (rho.colwise() * x).colwise().sum().transpose();
    const Eigen::ArrayXd den = rho.colwise().sum().transpose();
    out.push_back((num / den).mean());
  }
  return out;
}

}  // namespace qnl
