// Single-particle reduced density matrices and linear entropy for the exact
// two-body state and for the TDQMC guide-wave ensemble.
#ifndef QNL_ENTANGLEMENT_HPP
#define QNL_ENTANGLEMENT_HPP

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "qnl/model.hpp"
#include "qnl/spectral2d.hpp"
#include "qnl/tdqmc.hpp"

namespace qnl {

/// rho(x_m, x_m') on the grid. Quadrature weights are not folded in:
/// Tr rho = sum_m rho(x_m, x_m) dx.
struct DensityMatrix1D {
  Grid1D grid;
  Eigen::MatrixXcd rho;
  double time = 0.0;

  double trace() const;
  /// max |rho - rho^dagger|
  double hermiticity_error() const;
  /// Smallest eigenvalue of the operator rho dx.
  double min_eigenvalue() const;
  /// Largest eigenvalue of the operator rho dx.
  double max_eigenvalue() const;
};

/// rho_i(x, x') = sum_{x_other} Psi Psi^* dx_other for electron 0 or 1.
DensityMatrix1D reduced_density_exact(const WaveFunction2D& psi, int electron);

/// rho_i(x, x') = (1/M) sum_k phi_i^k(x) phi_i^k(x')^*, rescaled to unit trace.
DensityMatrix1D reduced_density_tdqmc(const TdqmcEnsemble& ensemble,
                                      int electron);

/// S = 1 - Tr rho^2 with Tr rho^2 = sum |rho(x_m, x_m')|^2 dx^2.
double linear_entropy(const DensityMatrix1D& rho);

/// Entropy of one method along a run. Imaginary-time points are stored at
/// negative times, tau - tau_end, so that the buildup ends at t = 0.
struct EntropySeries {
  std::string label;
  std::vector<double> times;
  std::vector<double> values;

  std::size_t size() const { return times.size(); }
  void push(double t, double s) {
    times.push_back(t);
    values.push_back(s);
  }
};

/// Maps accumulated tau to tau - tau_end for every point.
void shift_buildup(EntropySeries& series, double tau_end);

EntropySeries entropy_series(std::span<const WaveFunction2D> snapshots,
                             TimeMode mode, std::string label,
                             int electron = 0);

EntropySeries entropy_series(std::span<const TdqmcEnsemble> snapshots,
                             std::string label, int electron = 0);

}  // namespace qnl

#endif  // QNL_ENTANGLEMENT_HPP
