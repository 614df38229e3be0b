#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <omp.h>

#include "doctest.h"
#include "oracles.hpp"
#include "qnl/tdqmc.hpp"

using namespace qnl;

namespace {

// Normalised harmonic-oscillator ground state of V = x^2 / 2.
Eigen::VectorXcd harmonic_ground(const Grid1D& g) {
  const Eigen::ArrayXd x = g.points();
  return (std::pow(std::numbers::pi, -0.25) * (-0.5 * x.square()).exp())
      .cast<Complex>()
      .matrix();
}

TdqmcEnsemble harmonic_ensemble(int m, int n, std::uint64_t seed) {
  TdqmcEnsemble ens = init_ensemble(m, 1.0, Grid1D(n, 20.0), {0.82, 0.82}, seed);
  for (auto& e : ens.electrons)
    e.waves = harmonic_ground(ens.grid).replicate(1, m);
  return ens;
}

double normal_cdf(double x, double sd) {
  return 0.5 * (1.0 + std::erf(x / (sd * std::numbers::sqrt2)));
}

}  // namespace

TEST_CASE("kernel weight") {
  CHECK(kernel_weight(0.3, 0.3, 0.8) == 1.0);
  CHECK(kernel_weight(1.0, 0.2, 0.8) == doctest::Approx(std::exp(-0.5)));
  CHECK(kernel_weight(-1.0, 2.0, 0.5) == kernel_weight(2.0, -1.0, 0.5));
  CHECK(kernel_weight(5.0, 0.0, 0.5) < 1e-20);
  CHECK_THROWS_AS(kernel_weight(0.0, 0.0, 0.0), ValidationError);
  CHECK_THROWS_AS(kernel_weight(0.0, 0.0, -1.0), ValidationError);
}

TEST_CASE("trigonometric interpolation") {
  const Grid1D g(64, 20.0);
  const Eigen::ArrayXd x = g.points();
  const double w = 1.3;
  Eigen::VectorXcd f =
      ((-(x - 0.4).square() / (2 * w * w)).exp().cast<Complex>() *
       (Complex(0, 0.7) * x).exp())
          .matrix();
  Eigen::VectorXcd spec = f;
  FftPlan::batch1d(64, 1).forward(spec.data());
  spec /= 64.0;

  for (int m : {0, 17, 32, 50})
    CHECK(std::abs(spectral_sample(spec, g, g.point(m)).value - f(m)) < 1e-12);

  for (double xs : {-1.234, 0.0, 0.77, 2.5}) {
    const double u = xs - 0.4;
    const Complex val = std::exp(-u * u / (2 * w * w)) *
                        std::exp(Complex(0, 0.7 * xs));
    const Complex dlog = -u / (w * w) + Complex(0, 0.7);
    const Complex d1 = val * dlog;
    const Complex d2 = val * (dlog * dlog - 1.0 / (w * w));
    const SpectralSample s = spectral_sample(spec, g, xs);
    CHECK(std::abs(s.value - val) < 1e-8);
    CHECK(std::abs(s.d1 - d1) < 1e-7);
    CHECK(std::abs(s.d2 - d2) < 1e-6);
  }
}

TEST_CASE("effective potential limits") {
  const SystemSpec sys;
  const Grid1D g(64, 20.0);
  const Eigen::ArrayXd x = g.points();

  SUBCASE("single walker") {
    TdqmcEnsemble ens = init_ensemble(1, 1.0, g, {0.5, 0.5}, 3);
    const Eigen::VectorXd v = effective_potential(ens, sys, 0, 0);
    const Eigen::ArrayXd ref =
        soft_core_potential(x, ens.electrons[1].walkers(0), sys);
    CHECK((v.array() - ref).abs().maxCoeff() < 1e-14);
    CHECK((effective_potentials(ens, sys, 0).col(0).array() - ref)
              .abs()
              .maxCoeff() < 1e-14);
  }

  const int m = 40;
  TdqmcEnsemble ens = init_ensemble(m, 1.0, g, {0.82, 0.82}, 5);
  ens.electrons[1].walkers = Eigen::VectorXd::LinSpaced(m, -3.0, 3.0);

  SUBCASE("local limit") {
    ens.electrons[1].sigma = 1e-4;
    const Eigen::MatrixXd v = effective_potentials(ens, sys, 0);
    double err = 0.0;
    for (int k = 0; k < m; ++k)
      err = std::max(err, (v.col(k).array() -
                           soft_core_potential(x, ens.electrons[1].walkers(k), sys))
                              .abs()
                              .maxCoeff());
    CHECK(err < 1e-10);
  }

  SUBCASE("mean-field limit") {
    ens.electrons[1].sigma = 1e4;
    const Eigen::MatrixXd v = effective_potentials(ens, sys, 0);
    Eigen::ArrayXd hartree = Eigen::ArrayXd::Zero(x.size());
    for (int l = 0; l < m; ++l)
      hartree += soft_core_potential(x, ens.electrons[1].walkers(l), sys);
    hartree /= m;
    double err = 0.0;
    for (int k = 0; k < m; ++k)
      err = std::max(err, (v.col(k).array() - hartree).abs().maxCoeff());
    CHECK(err < 1e-6);
  }

  SUBCASE("batched and direct forms agree") {
    const Eigen::MatrixXd v = effective_potentials(ens, sys, 1);
    for (int k : {0, 7, 39})
      CHECK((v.col(k) - effective_potential(ens, sys, 1, k))
                .cwiseAbs()
                .maxCoeff() < 1e-12);
  }

  SUBCASE("interaction off") {
    SystemSpec off = sys;
    off.interaction_on = false;
    CHECK(effective_potentials(ens, off, 0).isZero(0.0));
  }

  SUBCASE("invalid sigma") {
    ens.electrons[1].sigma = 0.0;
    CHECK_THROWS_AS(effective_potentials(ens, sys, 0), ValidationError);
  }
}

TEST_CASE("energy estimators on known waves") {
  SystemSpec off;
  off.interaction_on = false;
  TdqmcEnsemble ens = harmonic_ensemble(50, 64, 9);
  CHECK(energy_mixed(ens, off).value == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(energy_mixed(ens, off).error < 1e-6);
  CHECK(energy_wave(ens, off).value == doctest::Approx(1.0).epsilon(1e-6));

  for (double w : {0.6, 1.0, 1.7}) {
    TdqmcEnsemble gauss = init_ensemble(10, w, Grid1D(128, 20.0), {1.0, 1.0}, 1);
    const double exact = 2 * (w * w / 4 + 1 / (4 * w * w));
    CHECK(std::abs(energy_wave(gauss, off).value - exact) < 1e-8);
  }

  // With interaction the i>j term pairs the walker of electron 1 with the
  // wave of electron 0.
  const SystemSpec on;
  const Eigen::ArrayXd x = ens.grid.points();
  const Eigen::VectorXd terms = energy_wave_terms(ens, on);
  const Eigen::ArrayXd rho0 = ens.electrons[0].waves.col(3).array().abs2();
  const double vee =
      (soft_core_potential(x, ens.electrons[1].walkers(3), on) * rho0).sum() *
      ens.grid.spacing();
  CHECK(terms(3) == doctest::Approx(1.0 + vee).epsilon(1e-9));
}

TEST_CASE("walkers sample the guide-wave density") {
  SystemSpec off;
  off.interaction_on = false;
  const int m = 10000;
  TdqmcEnsemble ens = init_ensemble(m, 2.0, Grid1D(64, 20.0), {1.0, 1.0}, 11);
  run_stage1(ens, off, ImaginaryStepParams{}, 400);

  for (const auto& e : ens.electrons) {
    std::vector<double> xs(e.walkers.data(), e.walkers.data() + m);
    std::sort(xs.begin(), xs.end());
    double ks = 0.0;
    for (int i = 0; i < m; ++i) {
      const double f = normal_cdf(xs[i], std::sqrt(0.5));
      ks = std::max({ks, std::abs(f - double(i) / m),
                     std::abs(f - double(i + 1) / m)});
    }
    CHECK(ks < 0.05);
  }
  CHECK(energy_wave(ens, off).value == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("pure drift without noise") {
  SystemSpec off;
  off.interaction_on = false;
  TdqmcEnsemble ens = harmonic_ensemble(20, 64, 2);
  const Eigen::VectorXd start = ens.electrons[0].walkers;
  ImaginaryStepParams p;
  p.diffusion = 0.0;
  p.include_drift = false;
  walker_drift_diffusion_step(ens, p);
  CHECK(ens.electrons[0].walkers == start);

  // Drift of the harmonic ground state is -x.
  p.include_drift = true;
  walker_drift_diffusion_step(ens, p);
  const Eigen::VectorXd expect = start * (1 - p.dtau);
  CHECK((ens.electrons[0].walkers - expect).cwiseAbs().maxCoeff() < 1e-9);

  p.diffusion = -1.0;
  CHECK_THROWS_AS(walker_drift_diffusion_step(ens, p), ValidationError);
}

TEST_CASE("results do not depend on the thread count") {
  const SystemSpec sys;
  auto run = [&](int threads) {
    omp_set_num_threads(threads);
    TdqmcEnsemble ens = init_ensemble(150, 1.0, Grid1D(64, 20.0), {0.82, 0.82}, 4);
    run_stage1(ens, sys, ImaginaryStepParams{}, 15);
    return ens;
  };
  const int saved = omp_get_max_threads();
  const TdqmcEnsemble a = run(1);
  const TdqmcEnsemble b = run(4);
  omp_set_num_threads(saved);
  for (int i = 0; i < 2; ++i) {
    CHECK(a.electrons[i].walkers == b.electrons[i].walkers);
    CHECK(a.electrons[i].waves == b.electrons[i].waves);
  }
}

TEST_CASE("walker relabelling") {
  const SystemSpec sys;
  const int m = 30;
  TdqmcEnsemble a = init_ensemble(m, 1.0, Grid1D(64, 20.0), {0.7, 0.9}, 8);
  run_stage1(a, sys, ImaginaryStepParams{}, 5);

  std::vector<int> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::rotate(perm.begin(), perm.begin() + 7, perm.end());
  TdqmcEnsemble b = a;
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < m; ++k) {
      b.electrons[i].walkers(k) = a.electrons[i].walkers(perm[k]);
      b.electrons[i].waves.col(k) = a.electrons[i].waves.col(perm[k]);
    }

  CHECK(energy_wave(b, sys).value ==
        doctest::Approx(energy_wave(a, sys).value).epsilon(1e-12));
  CHECK(energy_mixed(b, sys).value ==
        doctest::Approx(energy_mixed(a, sys).value).epsilon(1e-12));
  const Eigen::MatrixXd va = effective_potentials(a, sys, 0);
  const Eigen::MatrixXd vb = effective_potentials(b, sys, 0);
  double err = 0.0;
  for (int k = 0; k < m; ++k)
    err = std::max(err, (vb.col(k) - va.col(perm[k])).cwiseAbs().maxCoeff());
  CHECK(err < 1e-12);
}

TEST_CASE("two-stage ground state") {
  const SystemSpec sys;
  TdqmcEnsemble ens = init_ensemble(200, 1.0, Grid1D(64, 20.0), {0.82, 0.82}, 21);
  GroundStateOptions opt;
  opt.stage1_steps = 300;
  std::vector<Eigen::VectorXd> at_end_of_stage1;
  bool walkers_moved = false;
  opt.observer = [&](const TdqmcEnsemble& e, const EnergyRecord& r) {
    if (r.stage == 1) {
      at_end_of_stage1 = {e.electrons[0].walkers, e.electrons[1].walkers};
    } else {
      walkers_moved |= e.electrons[0].walkers != at_end_of_stage1[0] ||
                       e.electrons[1].walkers != at_end_of_stage1[1];
    }
  };
  const GroundStateResult r = prepare_ground_state(ens, sys, opt);
  CHECK(r.converged);
  CHECK_FALSE(walkers_moved);
  CHECK(r.history.front().stage == 1);
  CHECK(r.history.back().stage == 2);
  CHECK(r.energy.wave.value > 1.74);
  CHECK(r.energy.wave.value < 1.80);
  CHECK(std::abs(r.energy.mixed.value - r.energy.wave.value) < 0.05);
  CHECK(std::abs(ens.time - 0.01 * (300 + r.stage2_steps)) < 1e-9);

  GroundStateOptions tight = opt;
  tight.observer = nullptr;
  tight.stage2_tol = 1e-300;
  tight.stage2_max_steps = 20;
  CHECK_THROWS_AS(prepare_ground_state(ens, sys, tight), NumericalError);
}

TEST_CASE("driven non-interacting dipole") {
  SystemSpec off;
  off.interaction_on = false;
  TdqmcEnsemble ens = harmonic_ensemble(100, 128, 13);
  const Eigen::VectorXd start0 = ens.electrons[0].walkers;
  const Eigen::VectorXd start1 = ens.electrons[1].walkers;
  const FieldSpec f = FieldSpec::single(2, 0, 0.1, 5.0);
  const double dt = 0.001;
  double werr = 0.0, terr = 0.0, idler = 0.0;
  for (int s = 1; s <= 2000; ++s) {
    CHECK(real_time_step(ens, off, f, dt) == 0);
    if (s % 100) continue;
    const double t = s * dt;
    const double ref = oracle::driven_oscillator(t, 0.1, 5.0);
    werr = std::max(werr, std::abs(wave_dipole(ens)[0] - ref));
    terr = std::max(terr, std::abs((ens.electrons[0].walkers - start0).mean() - ref));
    idler = std::max(idler,
                     (ens.electrons[1].walkers - start1).cwiseAbs().maxCoeff());
  }
  CHECK(werr < 1e-4);
  CHECK(terr < 1e-3);
  // The analytic Gaussian is only an eigenstate of the discrete propagator
  // up to O(dt^2), so the idler breathes very slightly.
  CHECK(idler < 1e-6);
  CHECK(tdqmc_dipole(ens)[1].value == doctest::Approx(start1.mean()));
}

TEST_CASE("decoupled electrons do not influence each other") {
  SystemSpec off;
  off.interaction_on = false;
  TdqmcEnsemble a = init_ensemble(40, 1.0, Grid1D(64, 20.0), {0.8, 0.8}, 6);
  run_stage1(a, off, ImaginaryStepParams{}, 50);
  TdqmcEnsemble b = a;
  b.electrons[0].walkers.array() += 0.5;
  const FieldSpec drive = FieldSpec::single(2, 0, 2.0, 5.0);
  for (int s = 0; s < 100; ++s) {
    real_time_step(a, off, FieldSpec::none(), 0.002);
    real_time_step(b, off, drive, 0.002);
  }
  CHECK(a.electrons[1].walkers == b.electrons[1].walkers);
  CHECK(a.electrons[1].waves == b.electrons[1].waves);
  CHECK(a.electrons[0].walkers != b.electrons[0].walkers);
}

TEST_CASE("edge walkers are clamped and flagged") {
  SystemSpec off;
  off.interaction_on = false;
  TdqmcEnsemble ens = init_ensemble(3, 1.0, Grid1D(64, 20.0), {1.0, 1.0}, 1);
  const Eigen::ArrayXd x = ens.grid.points();
  // Plane wave with uniform positive velocity.
  const Eigen::VectorXcd plane =
      ((Complex(0, 2.0 * std::numbers::pi * 3 / 20.0) * x).exp() /
       std::sqrt(20.0))
          .matrix();
  for (auto& e : ens.electrons) e.waves = plane.replicate(1, 3);
  ens.electrons[0].walkers << 0.0, ens.grid.upper() - 1e-4, -1.0;
  const int flagged = real_time_step(ens, off, FieldSpec::none(), 0.01);
  CHECK(flagged == 1);
  CHECK(ens.electrons[0].edge_flags[1] == 1);
  CHECK(ens.electrons[0].walkers(1) == ens.grid.upper());
  CHECK(ens.electrons[0].walkers(0) ==
        doctest::Approx(0.01 * 2.0 * std::numbers::pi * 3 / 20.0));
}

TEST_CASE("ensemble validation") {
  TdqmcEnsemble ens = init_ensemble(5, 1.0, Grid1D(32, 20.0), {1.0, 1.0}, 1);
  CHECK_NOTHROW(ens.validate());
  ens.electrons[1].walkers.resize(4);
  CHECK_THROWS_AS(ens.validate(), ValidationError);
  CHECK_THROWS_AS(init_ensemble(0, 1.0, Grid1D(32, 20.0), {1.0}, 1),
                  ValidationError);
  CHECK_THROWS_AS(GuideWaveStepper(Grid1D(32, 20.0), SystemSpec{},
                                   TimeMode::real, 0.0),
                  ValidationError);
}
