// Shared domain types for the two-electron 1D model: grids, potentials,
// driving fields and per-walker random streams. Atomic units throughout.
#ifndef QNL_MODEL_HPP
#define QNL_MODEL_HPP

#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace qnl {

using Complex = std::complex<double>;

/// Error raised when a configuration or argument violates a documented
/// precondition.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Error raised when a numerical procedure fails (NaN, edge leakage,
/// budget exhausted, ill-conditioned fit).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Error raised by file input/output and checkpoint decoding.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Uniform periodic grid of `n_points` samples spanning `span` a.u. and
/// centred on the origin: x_m = -span/2 + m*dx, dx = span/n_points.
class Grid1D {
 public:
  Grid1D(int n_points, double span);

  int size() const { return n_points_; }
  double span() const { return span_; }
  double spacing() const { return span_ / n_points_; }

  double point(int m) const { return -0.5 * span_ + m * spacing(); }
  double lower() const { return point(0); }
  double upper() const { return point(n_points_ - 1); }
  bool contains(double x) const { return x >= lower() && x <= upper(); }

  Eigen::ArrayXd points() const;
  /// Angular wavenumbers in FFT order (0, dk, ..., -N/2 dk, ..., -dk).
  Eigen::ArrayXd wavenumbers() const;

  friend bool operator==(const Grid1D&, const Grid1D&) = default;

 private:
  int n_points_;
  double span_;
};

/// Configuration-space grid (x1, x2) for the two-body wave function.
struct Grid2D {
  Grid1D axis1;
  Grid1D axis2;

  explicit Grid2D(const Grid1D& both) : axis1(both), axis2(both) {}
  Grid2D(const Grid1D& a1, const Grid1D& a2) : axis1(a1), axis2(a2) {}

  Eigen::Index size() const {
    return Eigen::Index(axis1.size()) * axis2.size();
  }
  double cell_area() const { return axis1.spacing() * axis2.spacing(); }

  friend bool operator==(const Grid2D&, const Grid2D&) = default;
};

struct SystemSpec {
  int n_electrons = 2;
  /// c in V_en(x) = c x^2.
  double confinement_strength = 0.5;
  /// a in V_ee = 1/sqrt(a + (x1-x2)^2).
  double softcore_a = 1.0;
  bool interaction_on = true;

  void validate() const;
  friend bool operator==(const SystemSpec&, const SystemSpec&) = default;
};

/// Sine drive E(t) = amplitude * sin(omega t + phase), zero before t_on.
struct Drive {
  double amplitude = 0.0;
  double omega = 5.0;
  double phase = 0.0;
  double t_on = 0.0;

  friend bool operator==(const Drive&, const Drive&) = default;
};

/// One drive per electron. Electrons are indexed from 0; a missing entry
/// means that electron is field-free.
struct FieldSpec {
  std::vector<Drive> drives;

  static FieldSpec none() { return {}; }
  /// Drive only electron `driven` with the given amplitude and carrier.
  static FieldSpec single(int n_electrons, int driven, double amplitude,
                          double omega);

  bool is_zero() const;
  void validate() const;
  friend bool operator==(const FieldSpec&, const FieldSpec&) = default;
};

// ---------------------------------------------------------------------------
// Potentials. Scalar overloads plus Eigen array overloads so that grid-wide
// evaluation stays an expression.

inline double confinement_potential(double x, const SystemSpec& spec) {
  return spec.confinement_strength * x * x;
}

template <typename Derived>
auto confinement_potential(const Eigen::ArrayBase<Derived>& x,
                           const SystemSpec& spec) {
  return spec.confinement_strength * x.square();
}

inline double soft_core_potential(double x1, double x2,
                                  const SystemSpec& spec) {
  if (!spec.interaction_on) return 0.0;
  const double d = x1 - x2;
  return 1.0 / std::sqrt(spec.softcore_a + d * d);
}

/// V_ee(x, x2) for every element of x, holding x2 fixed.
template <typename Derived>
Eigen::ArrayXd soft_core_potential(const Eigen::ArrayBase<Derived>& x,
                                   double x2, const SystemSpec& spec) {
  if (!spec.interaction_on) return Eigen::ArrayXd::Zero(x.size());
  return (spec.softcore_a + (x - x2).square()).rsqrt();
}

double field_value(double t, int electron, const FieldSpec& fields);

inline double dipole_potential(double x, double t, int electron,
                               const FieldSpec& fields) {
  return -field_value(t, electron, fields) * x;
}

// ---------------------------------------------------------------------------

/// Independent, reproducible random stream keyed by (master_seed, stream_id).
///
/// The engine is seeded through std::seed_seq from both halves of each key,
/// so distinct keys give unrelated sequences. Every draw is counted; the
/// triple (master_seed, stream_id, draws) is the complete state and is what
/// checkpoints persist.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

  double uniform();  // [0, 1)
  double normal();   // N(0, 1)

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t draws() const { return draws_; }

  /// Rebuild a stream that has already produced `draws` engine outputs.
  static RngStream restore(std::uint64_t master_seed, std::uint64_t stream_id,
                           std::uint64_t draws);

 private:
  // Counts engine invocations so that state can be rebuilt with discard().
  struct CountingEngine {
    using result_type = std::mt19937_64::result_type;
    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() {
      ++*count;
      return (*engine)();
    }
    std::mt19937_64* engine;
    std::uint64_t* count;
  };

  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::uint64_t draws_ = 0;
  std::mt19937_64 engine_;
};

}  // namespace qnl

#endif  // QNL_MODEL_HPP
