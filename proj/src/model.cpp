#include "qnl/model.hpp"

#include <bit>
#include <cmath>
#include <numbers>

namespace qnl {

Grid1D::Grid1D(int n_points, double span) : n_points_(n_points), span_(span) {
  if (n_points < 8 || !std::has_single_bit(static_cast<unsigned>(n_points)))
    throw ValidationError("grid n_points must be a power of two >= 8, got " +
                          std::to_string(n_points));
  if (!(span > 0.0) || !std::isfinite(span))
    throw ValidationError("grid span must be positive and finite");
}

Eigen::ArrayXd Grid1D::points() const {
  return Eigen::ArrayXd::LinSpaced(n_points_, 0, n_points_ - 1) * spacing() -
         0.5 * span_;
}

Eigen::ArrayXd Grid1D::wavenumbers() const {
  const double dk = 2.0 * std::numbers::pi / span_;
  Eigen::ArrayXd k(n_points_);
  for (int m = 0; m < n_points_; ++m)
    k(m) = dk * (m < n_points_ / 2 ? m : m - n_points_);
  return k;
}

void SystemSpec::validate() const {
  if (n_electrons < 1) throw ValidationError("system.n_electrons must be >= 1");
  if (!(confinement_strength > 0.0))
    throw ValidationError("system.confinement_strength must be > 0");
  if (!(softcore_a > 0.0)) throw ValidationError("system.softcore_a must be > 0");
}

FieldSpec FieldSpec::single(int n_electrons, int driven, double amplitude,
                            double omega) {
  FieldSpec f;
  f.drives.resize(n_electrons);
  for (auto& d : f.drives) d.omega = omega;
  f.drives.at(driven).amplitude = amplitude;
  return f;
}

bool FieldSpec::is_zero() const {
  for (const auto& d : drives)
    if (d.amplitude != 0.0) return false;
  return true;
}

void FieldSpec::validate() const {
  for (const auto& d : drives) {
    if (!(d.omega >= 0.0)) throw ValidationError("field omega must be >= 0");
    if (!std::isfinite(d.amplitude) || !std::isfinite(d.phase) ||
        !std::isfinite(d.t_on))
      throw ValidationError("field parameters must be finite");
  }
}

double field_value(double t, int electron, const FieldSpec& fields) {
  if (electron < 0 || electron >= static_cast<int>(fields.drives.size()))
    return 0.0;
  const Drive& d = fields.drives[electron];
  if (t < d.t_on || d.amplitude == 0.0) return 0.0;
  return d.amplitude * std::sin(d.omega * t + d.phase);
}

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
    : master_seed_(master_seed), stream_id_(stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                    static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(stream_id),
                    static_cast<std::uint32_t>(stream_id >> 32)};
  engine_.seed(seq);
}

double RngStream::uniform() {
  CountingEngine eng{&engine_, &draws_};
  return std::uniform_real_distribution<double>(0.0, 1.0)(eng);
}

double RngStream::normal() {
  // A fresh distribution per draw: no cached second variate, so the draw
  // count alone determines the state.
  CountingEngine eng{&engine_, &draws_};
  return std::normal_distribution<double>(0.0, 1.0)(eng);
}

RngStream RngStream::restore(std::uint64_t master_seed,
                             std::uint64_t stream_id, std::uint64_t draws) {
  RngStream s(master_seed, stream_id);
  s.engine_.discard(draws);
  s.draws_ = draws;
  return s;
}

}  // namespace qnl
