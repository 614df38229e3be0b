#include "qnl/entanglement.hpp"

#include <Eigen/Eigenvalues>

namespace qnl {
namespace {

Eigen::VectorXd operator_spectrum(const DensityMatrix1D& d) {
  const Eigen::MatrixXcd h =
      0.5 * (d.rho + d.rho.adjoint()) * d.grid.spacing();
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(h,
                                                         Eigen::EigenvaluesOnly)
      .eigenvalues();
}

}  // namespace

double DensityMatrix1D::trace() const {
  return rho.diagonal().real().sum() * grid.spacing();
}

double DensityMatrix1D::hermiticity_error() const {
  return (rho - rho.adjoint()).cwiseAbs().maxCoeff();
}

double DensityMatrix1D::min_eigenvalue() const {
  return operator_spectrum(*this).minCoeff();
}

double DensityMatrix1D::max_eigenvalue() const {
  return operator_spectrum(*this).maxCoeff();
}

DensityMatrix1D reduced_density_exact(const WaveFunction2D& psi, int electron) {
  if (electron != 0 && electron != 1)
    throw ValidationError("electron index must be 0 or 1");
  const auto a = psi.amplitudes.matrix();
  if (electron == 0) {
    Eigen::MatrixXcd rho = a * a.adjoint() * psi.grid.axis2.spacing();
    return {psi.grid.axis1, std::move(rho), psi.time};
  }
  Eigen::MatrixXcd rho = a.transpose() * a.conjugate() * psi.grid.axis1.spacing();
  return {psi.grid.axis2, std::move(rho), psi.time};
}

DensityMatrix1D reduced_density_tdqmc(const TdqmcEnsemble& ens, int electron) {
  if (electron < 0 || electron >= ens.electron_count())
    throw ValidationError("electron index out of range");
  const Eigen::MatrixXcd& w = ens.electrons[electron].waves;
  DensityMatrix1D d{ens.grid, w * w.adjoint() / double(w.cols()), ens.time};
  d.rho /= d.trace();
  return d;
}

double linear_entropy(const DensityMatrix1D& d) {
  const double dx = d.grid.spacing();
  return 1.0 - d.rho.cwiseAbs2().sum() * dx * dx;
}

void shift_buildup(EntropySeries& series, double tau_end) {
  for (double& t : series.times) t -= tau_end;
}

EntropySeries entropy_series(std::span<const WaveFunction2D> snapshots,
                             TimeMode mode, std::string label, int electron) {
  EntropySeries s{std::move(label), {}, {}};
  for (const auto& psi : snapshots)
    s.push(psi.time, linear_entropy(reduced_density_exact(psi, electron)));
  if (mode == TimeMode::imaginary && !snapshots.empty())
    shift_buildup(s, snapshots.back().time);
  return s;
}

EntropySeries entropy_series(std::span<const TdqmcEnsemble> snapshots,
                             std::string label, int electron) {
  EntropySeries s{std::move(label), {}, {}};
  for (const auto& ens : snapshots)
    s.push(ens.time, linear_entropy(reduced_density_tdqmc(ens, electron)));
  if (!snapshots.empty() && snapshots.back().mode == TimeMode::imaginary)
    shift_buildup(s, snapshots.back().time);
  return s;
}

}  // namespace qnl
