#include "qnl/analysis.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include <Eigen/SVD>
#include <boost/math/tools/minima.hpp>

namespace qnl {
namespace {

double poly(const Eigen::VectorXd& c, double x, int deriv = 0) {
  double r = 0.0;
  for (Eigen::Index p = c.size() - 1; p >= deriv; --p) {
    double f = 1.0;
    for (int q = 0; q < deriv; ++q) f *= double(p - q);
    r = r * x + f * c(p);
  }
  return r;
}

}  // namespace

void SweepTable::validate() const {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!(rows[i].error >= 0.0) && rows[i].converged)
      throw ValidationError("sweep row has negative standard error");
    if (i > 0 && !(rows[i].sigma > rows[i - 1].sigma))
      throw ValidationError("sweep sigmas must be strictly increasing");
  }
}

std::vector<SweepRow> SweepTable::converged_rows() const {
  std::vector<SweepRow> out;
  std::copy_if(rows.begin(), rows.end(), std::back_inserter(out),
               [](const SweepRow& r) { return r.converged; });
  return out;
}

std::uint64_t sweep_seed(std::uint64_t master_seed, double sigma,
                         SeedPolicy policy) {
  if (policy == SeedPolicy::common) return master_seed;
  const auto bits = std::bit_cast<std::uint64_t>(sigma);
  std::seed_seq seq{std::uint32_t(master_seed), std::uint32_t(master_seed >> 32),
                    std::uint32_t(bits), std::uint32_t(bits >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (std::uint64_t(out[0]) << 32) | out[1];
}

SweepTable sigma_sweep(const std::vector<double>& sigmas,
                       const SystemSpec& system, const SweepOptions& options) {
  if (sigmas.empty()) throw ValidationError("sigma list is empty");
  for (double s : sigmas)
    if (!(s > 0.0))
      throw ValidationError("sigma must be positive, got " + std::to_string(s));
  std::vector<double> sorted = sigmas;
  std::sort(sorted.begin(), sorted.end());

  SweepTable table;
  for (double sigma : sorted) {
    SweepRow row;
    row.sigma = sigma;
    row.seed = sweep_seed(options.master_seed, sigma, options.seeds);
    row.walkers = options.walkers;
    TdqmcEnsemble ens = init_ensemble(options.walkers, options.initial_width,
                                      options.grid, {sigma, sigma}, row.seed);
    try {
      const GroundStateResult r = prepare_ground_state(ens, system, options.ground);
      row.energy = r.energy.wave.value;
      row.error = r.energy.wave.error;
      row.mixed = r.energy.mixed.value;
    } catch (const NumericalError&) {
      row.converged = false;
      row.energy = row.error = row.mixed =
          std::numeric_limits<double>::quiet_NaN();
    }
    table.rows.push_back(row);
    if (options.progress) options.progress(row);
  }
  table.validate();
  return table;
}

double FitResult::operator()(double sigma) const {
  return poly(coefficients, sigma);
}

FitResult polyfit_min(const SweepTable& table, int degree) {
  if (degree < 1) throw ValidationError("fit degree must be >= 1");
  const std::vector<SweepRow> rows = table.converged_rows();
  const int n = int(rows.size());
  if (n < degree + 1)
    throw ValidationError("need at least " + std::to_string(degree + 1) +
                          " converged rows for a degree-" +
                          std::to_string(degree) + " fit, have " +
                          std::to_string(n));

  Eigen::MatrixXd v(n, degree + 1);
  Eigen::VectorXd e(n);
  for (int i = 0; i < n; ++i) {
    e(i) = rows[i].energy;
    double p = 1.0;
    for (int d = 0; d <= degree; ++d, p *= rows[i].sigma) v(i, d) = p;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(v, Eigen::ComputeThinU |
                                               Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();
  FitResult fit;
  fit.degree = degree;
  fit.condition_number = sv(sv.size() - 1) > 0.0
                             ? sv(0) / sv(sv.size() - 1)
                             : std::numeric_limits<double>::infinity();
  if (!(fit.condition_number <= kMaxFitCondition))
    throw NumericalError("polynomial fit is ill conditioned (condition number " +
                         std::to_string(fit.condition_number) + ")");
  fit.coefficients = svd.solve(e);
  fit.residual_norm = (v * fit.coefficients - e).norm();

  double lo = rows.front().sigma, hi = rows.back().sigma;
  for (const auto& r : rows) {
    lo = std::min(lo, r.sigma);
    hi = std::max(hi, r.sigma);
  }
  const auto& c = fit.coefficients;
  auto f = [&](double x) { return poly(c, x); };

  if (degree == 2 && c(2) > 0.0) {
    fit.sigma_star = std::clamp(-c(1) / (2 * c(2)), lo, hi);
  } else {
    // Bracket on a fine scan, refine with Brent, polish with Newton on p'.
    const int samples = 2001;
    int best = 0;
    double fbest = f(lo);
    for (int i = 1; i < samples; ++i) {
      const double fx = f(lo + (hi - lo) * i / (samples - 1));
      if (fx < fbest) {
        fbest = fx;
        best = i;
      }
    }
    const double h = (hi - lo) / (samples - 1);
    double x = lo + best * h;
    if (best > 0 && best < samples - 1) {
      x = boost::math::tools::brent_find_minima(
              f, x - h, x + h, std::numeric_limits<double>::digits / 2)
              .first;
      for (int it = 0; it < 3; ++it) {
        const double d2 = poly(c, x, 2);
        if (!(d2 > 0.0)) break;
        const double next = x - poly(c, x, 1) / d2;
        if (!(std::abs(next - x) < h)) break;
        x = next;
      }
    }
    fit.sigma_star = x;
  }
  fit.e_star = f(fit.sigma_star);
  const double scale = std::max(1.0, std::abs(fit.e_star));
  fit.unique_minimum = poly(c, fit.sigma_star, 2) > 1e-8 * scale;
  return fit;
}

namespace {

// Closed form for x'' + W^2 x = A sin(w t + phase) from rest at t_on.
double driven_closed_form(const Drive& d, double big_w, double t) {
  if (t <= d.t_on || d.amplitude == 0.0) return 0.0;
  const double tau = t - d.t_on;
  const double ph = d.omega * d.t_on + d.phase;
  const double a = d.amplitude;
  if (std::abs(d.omega - big_w) < 1e-9 * big_w) {
    return -a * tau / (2 * big_w) * std::cos(big_w * tau + ph) +
           a * std::cos(ph) / (2 * big_w * big_w) * std::sin(big_w * tau);
  }
  const double amp = a / (big_w * big_w - d.omega * d.omega);
  return amp * (std::sin(d.omega * tau + ph) -
                std::sin(ph) * std::cos(big_w * tau) -
                d.omega / big_w * std::cos(ph) * std::sin(big_w * tau));
}

}  // namespace

DipoleSeries ehrenfest_oracle(const FieldSpec& fields, double confinement,
                              double duration, double dt, OdeMethod method) {
  if (!(confinement > 0.0))
    throw ValidationError("confinement strength must be positive");
  if (!(dt > 0.0) || !(duration >= 0.0))
    throw ValidationError("invalid oracle time axis");
  fields.validate();
  const double w2 = 2 * confinement;
  const double big_w = std::sqrt(w2);
  const long steps = std::lround(duration / dt);
  DipoleSeries out;

  if (method == OdeMethod::closed_form) {
    for (long m = 0; m <= steps; ++m) {
      const double t = m * dt;
      double x[2] = {0.0, 0.0};
      for (int i = 0; i < 2; ++i)
        if (i < int(fields.drives.size()))
          x[i] = driven_closed_form(fields.drives[i], big_w, t);
      out.push(t, x[0], x[1]);
    }
    return out;
  }

  double x[2] = {0, 0}, v[2] = {0, 0};
  out.push(0.0, 0.0, 0.0);
  for (long m = 0; m < steps; ++m) {
    const double t = m * dt;
    for (int i = 0; i < 2; ++i) {
      // Switch-on is decided once per step so that a drive starting on a
      // sample time does not leak into the preceding step.
      const bool has = i < int(fields.drives.size());
      const Drive d = has ? fields.drives[i] : Drive{};
      const bool live = has && t + 0.5 * dt >= d.t_on;
      auto acc = [&](double tt, double xx) {
        const double e =
            live ? d.amplitude * std::sin(d.omega * tt + d.phase) : 0.0;
        return -w2 * xx + e;
      };
      const double k1x = v[i], k1v = acc(t, x[i]);
      const double k2x = v[i] + 0.5 * dt * k1v;
      const double k2v = acc(t + 0.5 * dt, x[i] + 0.5 * dt * k1x);
      const double k3x = v[i] + 0.5 * dt * k2v;
      const double k3v = acc(t + 0.5 * dt, x[i] + 0.5 * dt * k2x);
      const double k4x = v[i] + dt * k3v;
      const double k4v = acc(t + dt, x[i] + dt * k3x);
      x[i] += dt / 6 * (k1x + 2 * k2x + 2 * k3x + k4x);
      v[i] += dt / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
    }
    out.push((m + 1) * dt, x[0], x[1]);
  }
  return out;
}

double max_idler_excursion(const TrajectorySet& set) {
  if (set.x2.rows() == 0) return 0.0;
  return (set.x2.rowwise() - set.x2.row(0)).cwiseAbs().maxCoeff();
}

IdlerRatio idler_ratio(const DipoleSeries& interacting,
                       const TrajectorySet& nonint) {
  IdlerRatio r;
  for (double d : interacting.d2) r.numerator = std::max(r.numerator, std::abs(d));
  r.denominator = max_idler_excursion(nonint);
  if (r.denominator == 0.0) {
    r.infinite = true;
    r.ratio = std::numeric_limits<double>::infinity();
  } else {
    r.ratio = r.numerator / r.denominator;
  }
  return r;
}

}  // namespace qnl
