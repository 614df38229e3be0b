#include <cmath>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "qnl/spectral2d.hpp"

using namespace qnl;

namespace {

SystemSpec harmonic() {
  SystemSpec s;
  s.interaction_on = false;
  return s;
}

double fidelity(const WaveFunction2D& a, const WaveFunction2D& b) {
  return std::abs((a.amplitudes.conjugate() * b.amplitudes).sum() *
                  a.grid.cell_area());
}

// Interacting ground state on a 128^2 grid, computed once for the file.
const RelaxResult& interacting_ground_state() {
  static const RelaxResult r = [] {
    const Grid2D g(Grid1D(128, 20.0));
    return relax_ground_state(init_gaussian(g, 1.0), SystemSpec{}, 0.002,
                              1e-11);
  }();
  return r;
}

}  // namespace

TEST_CASE("init_gaussian") {
  const Grid2D g(Grid1D(256, 20.0));
  const WaveFunction2D psi = init_gaussian(g, 1.0);
  CHECK(std::abs(psi.norm() - 1.0) < 1e-12);
  CHECK(std::abs(psi.mean_position(0)) < 1e-12);
  CHECK(std::abs(psi.mean_position(1)) < 1e-12);
  // Closed-form second moment w^2/2.
  CHECK(std::abs(psi.mean_square(0) - 0.5) < 1e-6);
  CHECK(std::abs(psi.mean_square(1) - 0.5) < 1e-6);
  CHECK_THROWS_AS(init_gaussian(g, 0.0), ValidationError);
}

TEST_CASE("free propagation spreads the packet") {
  SystemSpec free = harmonic();
  free.confinement_strength = 1e-12;
  const Grid2D g(Grid1D(128, 20.0));
  WaveFunction2D psi = init_gaussian(g, 1.0);
  const double before = psi.mean_square(0);
  const SplitStep2D stepper(g, free, {}, TimeMode::real, 0.001);
  for (int i = 0; i < 500; ++i) stepper.advance(psi);
  CHECK(psi.mean_square(0) > before + 0.05);
  CHECK(std::abs(psi.norm() - 1.0) < 1e-12);
}

TEST_CASE("harmonic ground state is stationary under real-time steps") {
  const Grid2D g(Grid1D(128, 20.0));
  const WaveFunction2D psi0 = init_gaussian(g, 1.0);
  WaveFunction2D psi = psi0;
  const SplitStep2D stepper(g, harmonic(), {}, TimeMode::real, 0.001);
  for (int i = 0; i < 1000; ++i) {
    stepper.advance(psi);
    if (i == 0) CHECK(std::abs(psi.norm() - 1.0) < 1e-12);
  }
  CHECK(std::abs(fidelity(psi0, psi) - 1.0) < 1e-8);
  CHECK(std::abs(psi.norm() - 1.0) < 1e-10);
}

TEST_CASE("energy expectation") {
  const Grid2D g(Grid1D(128, 20.0));
  const WaveFunction2D psi = init_gaussian(g, 1.0);
  CHECK(std::abs(energy_expectation(psi, harmonic()) - 1.0) < 1e-6);
  const Complex raw = hamiltonian_expectation(psi, SystemSpec{});
  CHECK(std::abs(raw.imag()) < 1e-10);
  // Rayleigh quotient bound.
  CHECK(raw.real() >= 1.7735);
}

TEST_CASE("non-interacting relaxation") {
  const Grid2D g(Grid1D(64, 20.0));
  const RelaxResult r =
      relax_ground_state(init_gaussian(g, 2.0), harmonic(), 0.002, 1e-12);
  CHECK(r.converged);
  CHECK(std::abs(r.energy - 1.0) < 1e-4);
}

TEST_CASE("interacting relaxation") {
  const RelaxResult& r = interacting_ground_state();
  CHECK(r.converged);
  CHECK(std::abs(r.energy - 1.7735) < 2e-3);
  CHECK(std::abs(r.psi.norm() - 1.0) < 1e-10);
  CHECK(r.psi.exchange_asymmetry() < 1e-10);
}

TEST_CASE("imaginary-time energy is non-increasing") {
  const Grid2D g(Grid1D(64, 20.0));
  RelaxOptions opt;
  opt.check_stride = 1;
  opt.max_steps = 400;
  opt.throw_on_budget = false;
  const RelaxResult r =
      relax_ground_state(init_gaussian(g, 1.6), SystemSpec{}, 0.002, 0.0, opt);
  for (std::size_t i = 11; i < r.energy_trace.size(); ++i)
    CHECK(r.energy_trace[i] <= r.energy_trace[i - 1] + 1e-9);
}

TEST_CASE("budget exhaustion throws") {
  const Grid2D g(Grid1D(32, 20.0));
  RelaxOptions opt;
  opt.max_steps = 5;
  CHECK_THROWS_AS(
      relax_ground_state(init_gaussian(g, 1.0), SystemSpec{}, 0.002, 0.0, opt),
      NumericalError);
}

TEST_CASE("relaxation matches dense diagonalisation on a 32x32 grid") {
  const Grid1D axis(32, 20.0);
  const Grid2D g(axis);
  const auto dense = oracle::dense_ground_state(axis, SystemSpec{});
  const RelaxResult r =
      relax_ground_state(init_gaussian(g, 1.0), SystemSpec{}, 0.002, 1e-13);
  CHECK(std::abs(r.energy - dense.energy) < 1e-4);
}

TEST_CASE("driven dipole follows the Ehrenfest oracle") {
  const RelaxResult& gs = interacting_ground_state();
  SystemSpec off;
  off.interaction_on = false;
  const FieldSpec drive = FieldSpec::single(2, 0, 15.0, 5.0);
  PropagationSchedule sched{0.001, 6000, 20, TimeMode::real};
  RealTimeOptions opt;
  opt.keep_snapshots = false;
  WaveFunction2D start = gs.psi;
  start.time = 0.0;
  const RealTimeRun run = propagate_real(start, off, drive, sched, opt);

  double err = 0.0, idler = 0.0;
  for (std::size_t i = 0; i < run.dipoles.size(); ++i) {
    const double t = run.dipoles.times[i];
    err = std::max(err, std::abs(run.dipoles.d1[i] -
                                 oracle::driven_oscillator(t, 15.0, 5.0)));
    idler = std::max(idler, std::abs(run.dipoles.d2[i]));
  }
  CHECK(err < 0.05);
  CHECK(idler < 1e-3);
  CHECK(std::abs(run.final_state.norm() - 1.0) < 1e-10);

  // Finite-difference residual of d'' + d - E(t).
  const double h = sched.dt * sched.snapshot_stride;
  double residual = 0.0;
  for (std::size_t i = 1; i + 1 < run.dipoles.size(); ++i) {
    const double acc = (run.dipoles.d1[i + 1] - 2 * run.dipoles.d1[i] +
                        run.dipoles.d1[i - 1]) /
                       (h * h);
    residual = std::max(residual,
                        std::abs(acc + run.dipoles.d1[i] -
                                 field_value(run.dipoles.times[i], 0, drive)));
  }
  // O(h^2) finite-difference error of a signal with amplitude ~ 15.
  CHECK(residual < 0.05);
}

TEST_CASE("field-free interacting ground state stays put") {
  const RelaxResult& gs = interacting_ground_state();
  WaveFunction2D start = gs.psi;
  start.time = 0.0;
  PropagationSchedule sched{0.001, 1000, 100, TimeMode::real};
  const RealTimeRun run = propagate_real(start, SystemSpec{}, {}, sched);
  for (std::size_t i = 0; i < run.dipoles.size(); ++i) {
    CHECK(std::abs(run.dipoles.d1[i]) < 1e-6);
    CHECK(std::abs(run.dipoles.d2[i]) < 1e-6);
  }
  CHECK(std::abs(run.final_state.norm() - 1.0) < 1e-10);
  CHECK(run.snapshots.size() == 11);
}

TEST_CASE("exchange symmetry survives symmetric driving") {
  const Grid2D g(Grid1D(64, 20.0));
  WaveFunction2D psi = init_gaussian(g, 1.2);
  FieldSpec both = FieldSpec::single(2, 0, 3.0, 2.0);
  both.drives[1] = both.drives[0];
  const SplitStep2D stepper(g, SystemSpec{}, both, TimeMode::real, 0.001);
  for (int i = 0; i < 1000; ++i) stepper.advance(psi);
  CHECK(psi.exchange_asymmetry() < 1e-8);
}

TEST_CASE("edge monitor aborts leaking runs") {
  const Grid2D g(Grid1D(32, 6.0));
  PropagationSchedule sched{0.01, 200, 1, TimeMode::real};
  CHECK_THROWS_AS(propagate_real(init_gaussian(g, 1.0), SystemSpec{},
                                 FieldSpec::single(2, 0, 20.0, 1.0), sched),
                  NumericalError);
}

TEST_CASE("Bohm velocity") {
  const Grid1D axis(128, 20.0);
  const Grid2D g(axis);

  SUBCASE("real wave function has zero velocity") {
    const WaveFunction2D psi = init_gaussian(g, 1.3);
    for (Point2 p : {Point2{0.1, -0.3}, Point2{1.234, 0.77}, Point2{-2, 2}}) {
      const BohmVelocity v = bohm_velocity(psi, p);
      CHECK(std::abs(v.v1) < 1e-10);
      CHECK(std::abs(v.v2) < 1e-10);
      CHECK_FALSE(v.guarded);
    }
  }

  SUBCASE("windowed plane wave") {
    const double dk = 2 * std::numbers::pi / axis.span();
    const double k1 = 3 * dk, k2 = -5 * dk;
    WaveFunction2D psi(g);
    const Eigen::ArrayXd x = axis.points();
    for (int i = 0; i < axis.size(); ++i)
      for (int j = 0; j < axis.size(); ++j)
        psi.amplitudes(i, j) =
            std::exp(-(x(i) * x(i) + x(j) * x(j)) / 8.0) *
            std::exp(Complex(0, k1 * x(i) + k2 * x(j)));
    psi.normalize();
    for (Point2 p : {Point2{0.05, 0.4}, Point2{-1.3, 2.1}, Point2{2.5, -0.9}}) {
      const BohmVelocity v = bohm_velocity(psi, p);
      CHECK(std::abs(v.v1 - k1) < 1e-6);
      CHECK(std::abs(v.v2 - k2) < 1e-6);
    }
  }

  SUBCASE("node guard") {
    WaveFunction2D psi = init_gaussian(g, 1.0);
    const Eigen::ArrayXd x = axis.points();
    for (int i = 0; i < axis.size(); ++i) psi.amplitudes.row(i) *= x(i);
    psi.normalize();
    CHECK(bohm_velocity(psi, {0.0, 0.5}).guarded);
    CHECK_FALSE(bohm_velocity(psi, {1.0, 0.5}).guarded);
  }
}

TEST_CASE("trajectories in a stationary state stay put") {
  // The dtau = 0.002 fixed point carries O(dtau^2) excited admixture, which
  // shows up as ~1e-5 drift over unit time; refine with a finer step first.
  RelaxOptions opt;
  opt.max_steps = 4000;
  opt.throw_on_budget = false;
  const RelaxResult gs = relax_ground_state(interacting_ground_state().psi,
                                            SystemSpec{}, 0.0005, 0.0, opt);
  WaveFunction2D start = gs.psi;
  start.time = 0.0;
  const RealTimeRun run = propagate_real(
      start, SystemSpec{}, {}, PropagationSchedule{0.001, 1000, 50});
  RngStream rng(42, 0);
  const auto starts = sample_density(start, 16, rng);
  const TrajectorySet traj = evolve_trajectories(run.snapshots, starts);
  REQUIRE(traj.times.size() == run.snapshots.size());
  for (Eigen::Index k = 0; k < traj.count(); ++k) {
    CHECK((traj.x1.col(k).array() - starts[k][0]).abs().maxCoeff() < 1e-6);
    CHECK((traj.x2.col(k).array() - starts[k][1]).abs().maxCoeff() < 1e-6);
    CHECK_FALSE(traj.terminated[k]);
  }
}

TEST_CASE("Bohmian ensemble mean tracks the quadrature dipole") {
  const Grid2D g(Grid1D(128, 20.0));
  SystemSpec off = harmonic();
  const WaveFunction2D psi0 = init_gaussian(g, 1.0);
  const RealTimeRun run =
      propagate_real(psi0, off, FieldSpec::single(2, 0, 2.0, 3.0),
                     PropagationSchedule{0.001, 2000, 10});
  const int k = 400;
  RngStream rng(7, 0);
  const TrajectorySet traj =
      evolve_trajectories(run.snapshots, sample_density(psi0, k, rng));
  const double sigma = std::sqrt(0.5 / k);
  for (std::size_t i = 0; i < traj.times.size(); i += 20) {
    const double mean = traj.x1.row(i).mean();
    CHECK(std::abs(mean - run.dipoles.d1[i]) < 4 * sigma);
  }
}

TEST_CASE("sample_density") {
  const Grid2D g(Grid1D(256, 20.0));
  const WaveFunction2D psi = init_gaussian(g, 1.0);
  const int k = 10000;
  RngStream rng(42, 3);
  const auto pts = sample_density(psi, k, rng);
  double m1 = 0, m2 = 0, s1 = 0;
  for (const auto& p : pts) {
    m1 += p[0];
    m2 += p[1];
    s1 += p[0] * p[0];
  }
  m1 /= k;
  m2 /= k;
  const double var = s1 / k - m1 * m1;
  // Standard errors: mean sqrt(0.5/k), variance 0.5 sqrt(2/k).
  CHECK(std::abs(m1) < 3 * std::sqrt(0.5 / k));
  CHECK(std::abs(m2) < 3 * std::sqrt(0.5 / k));
  CHECK(std::abs(var - 0.5) < 3 * 0.5 * std::sqrt(2.0 / k));

  RngStream again(42, 3);
  CHECK(sample_density(psi, k, again) == pts);
}

TEST_CASE("subtract_reference") {
  DipoleSeries a, zero;
  for (int i = 0; i < 5; ++i) {
    a.push(0.1 * i, std::sin(i), std::cos(i));
    zero.push(0.1 * i, 0.0, 0.0);
  }
  const DipoleSeries same = subtract_reference(a, a);
  for (std::size_t i = 0; i < same.size(); ++i) {
    CHECK(same.d1[i] == 0.0);
    CHECK(same.d2[i] == 0.0);
  }
  const DipoleSeries unchanged = subtract_reference(a, zero);
  CHECK(unchanged.d1 == a.d1);
  CHECK(unchanged.d2 == a.d2);

  DipoleSeries shifted = a;
  shifted.times[2] += 0.05;
  CHECK_THROWS_AS(subtract_reference(a, shifted), ValidationError);
  zero.push(1.0, 0, 0);
  CHECK_THROWS_AS(subtract_reference(a, zero), ValidationError);
}
