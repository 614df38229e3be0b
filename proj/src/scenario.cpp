#include "qnl/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include "qnl/analysis.hpp"
#include "qnl/checkpoint.hpp"
#include "qnl/entanglement.hpp"
#include "qnl/output.hpp"

namespace qnl {
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Report

bool ScenarioReport::has(const std::string& key) const {
  return std::any_of(headline.begin(), headline.end(),
                     [&](const auto& kv) { return kv.first == key; });
}

double ScenarioReport::value(const std::string& key) const {
  for (const auto& [k, v] : headline)
    if (k == key) return v;
  throw ValidationError("report for " + scenario + " has no entry '" + key + "'");
}

void ScenarioReport::set(const std::string& key, double v) {
  for (auto& kv : headline)
    if (kv.first == key) {
      kv.second = v;
      return;
    }
  headline.emplace_back(key, v);
}

// ---------------------------------------------------------------------------
// Pipeline building blocks

namespace {

// Trajectory start points get a stream that no walker can use.
constexpr std::uint64_t kTrajectoryStream = (std::uint64_t(1) << 63) | 1;

template <class F>
auto staged(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ValidationError& e) {
    throw ValidationError(stage + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(stage + ": " + e.what());
  } catch (const IoError& e) {
    throw IoError(stage + ": " + e.what());
  }
}

SystemSpec with_interaction(SystemSpec s, bool on) {
  s.interaction_on = on;
  return s;
}

struct ExactGround {
  WaveFunction2D psi;
  double energy = 0.0;
  int steps = 0;
  bool converged = false;
  std::vector<double> taus;
  std::vector<double> energies;
  EntropySeries entropy;
};

struct TdqmcGround {
  TdqmcEnsemble ensemble;
  GroundStateResult result;
  EntropySeries entropy;
};

struct ExactEvolution {
  DipoleSeries dipoles;
  TrajectorySet trajectories;
  EntropySeries entropy;
  std::optional<WaveFunction2D> final_state;
};

struct TdqmcEvolution {
  DipoleSeries dipoles;
  std::vector<double> err1;
  std::vector<double> err2;
  TrajectorySet trajectories;
  EntropySeries entropy;
  int flagged = 0;
};

std::string exact_key(const RunConfig& c, const SystemSpec& s) {
  std::ostringstream k;
  k.precision(17);
  k << c.grid.points << ' ' << c.grid.span << ' ' << s.confinement_strength << ' '
    << s.softcore_a << ' ' << s.interaction_on << ' ' << c.exact.dtau << ' '
    << c.exact.energy_tol << ' ' << c.exact.check_stride << ' '
    << c.exact.max_steps << ' ' << c.exact.initial_width;
  return k.str();
}

std::string tdqmc_key(const RunConfig& c, const SystemSpec& s, double sigma) {
  std::ostringstream k;
  k.precision(17);
  const TdqmcConfig& t = c.tdqmc;
  k << c.grid.points << ' ' << c.grid.span << ' ' << s.confinement_strength << ' '
    << s.softcore_a << ' ' << s.interaction_on << ' ' << sigma << ' ' << c.seed
    << ' ' << t.walkers << ' ' << t.dtau << ' ' << t.stage1_steps << ' '
    << t.stage2_tol << ' ' << t.stage2_max_steps << ' ' << t.record_stride << ' '
    << t.initial_width << ' ' << t.drift << ' ' << t.diffusion;
  return k.str();
}

}  // namespace

struct ScenarioContext::Cache {
  std::map<std::string, std::shared_ptr<const ExactGround>> exact;
  std::map<std::string, std::shared_ptr<const TdqmcGround>> tdqmc;
  /// Subtracted idler trajectories of the non-interacting experiment.
  std::map<std::string, TrajectorySet> nonint_idler;
};

ScenarioContext::ScenarioContext() : cache_(std::make_unique<Cache>()) {}
ScenarioContext::~ScenarioContext() = default;

namespace {

void say(ScenarioContext& ctx, const std::string& msg) {
  if (ctx.log) ctx.log(msg);
}

std::shared_ptr<const ExactGround> exact_ground(const RunConfig& cfg,
                                                const SystemSpec& sys,
                                                ScenarioContext& ctx) {
  auto& slot = ctx.cache().exact[exact_key(cfg, sys)];
  if (slot) return slot;
  const std::string stage =
      sys.interaction_on ? "exact ground state" : "exact non-interacting ground state";
  say(ctx, stage);
  return slot = staged(stage, [&] {
           const Grid1D g = cfg.grid1d();
           EntropySeries entropy{"exact", {}, {}};
           std::vector<double> taus, energies;
           RelaxOptions opt = cfg.relax_options();
           opt.observer = [&](const WaveFunction2D& psi, double e) {
             taus.push_back(psi.time);
             energies.push_back(e);
             entropy.push(psi.time, linear_entropy(reduced_density_exact(psi, 0)));
           };
           RelaxResult r = relax_ground_state(
               init_gaussian(Grid2D(g, g), cfg.exact.initial_width), sys,
               cfg.exact.dtau, cfg.exact.energy_tol, opt);
           shift_buildup(entropy, r.psi.time);
           return std::make_shared<const ExactGround>(ExactGround{
               std::move(r.psi), r.energy, r.steps, r.converged, std::move(taus),
               std::move(energies), std::move(entropy)});
         });
}

std::shared_ptr<const TdqmcGround> tdqmc_ground(const RunConfig& cfg,
                                                const SystemSpec& sys,
                                                double sigma,
                                                ScenarioContext& ctx) {
  auto& slot = ctx.cache().tdqmc[tdqmc_key(cfg, sys, sigma)];
  if (slot) return slot;
  const std::string stage = "TDQMC ground state (sigma " + format_number(sigma) + ")";
  say(ctx, stage);
  return slot = staged(stage, [&] {
           TdqmcEnsemble ens =
               init_ensemble(cfg.tdqmc.walkers, cfg.tdqmc.initial_width,
                             cfg.grid1d(), {sigma, sigma}, cfg.seed);
           EntropySeries entropy{tdqmc_label(sigma), {}, {}};
           GroundStateOptions o = cfg.ground_options();
           o.observer = [&](const TdqmcEnsemble& e, const EnergyRecord& r) {
             entropy.push(r.tau, linear_entropy(reduced_density_tdqmc(e, 0)));
           };
           GroundStateResult r = prepare_ground_state(ens, sys, o);
           shift_buildup(entropy, ens.time);
           return std::make_shared<const TdqmcGround>(
               TdqmcGround{std::move(ens), std::move(r), std::move(entropy)});
         });
}

std::vector<Point2> trajectory_starts(const RunConfig& cfg, const WaveFunction2D& psi) {
  RngStream rng(cfg.seed, kTrajectoryStream);
  return sample_density(psi, cfg.exact.trajectories, rng);
}

ExactEvolution exact_evolve(const WaveFunction2D& ground, const SystemSpec& sys,
                            const FieldSpec& fields, const RunConfig& cfg,
                            const std::vector<Point2>& starts, bool entropy,
                            bool keep_final) {
  WaveFunction2D psi = ground;
  psi.time = 0.0;
  TrajectoryIntegrator integrator(starts);
  ExactEvolution out;
  out.entropy.label = "exact";
  RealTimeOptions opt;
  opt.keep_snapshots = false;
  opt.edge_limit = cfg.exact.edge_limit;
  opt.observer = [&](const WaveFunction2D& s) {
    if (!starts.empty()) integrator.push(s);
    if (entropy) out.entropy.push(s.time, linear_entropy(reduced_density_exact(s, 0)));
  };
  RealTimeRun run = propagate_real(std::move(psi), sys, fields, cfg.exact_schedule(), opt);
  out.dipoles = std::move(run.dipoles);
  out.trajectories = integrator.result();
  if (keep_final) out.final_state = std::move(run.final_state);
  return out;
}

/// Runs one copy of the ground ensemble per field in lockstep. `each_step`
/// sees all ensembles after every step.
std::vector<TdqmcEvolution> tdqmc_evolve(
    const TdqmcEnsemble& ground, const SystemSpec& sys,
    const std::vector<FieldSpec>& fields, const RunConfig& cfg, bool entropy,
    const std::function<void(const std::vector<TdqmcEnsemble>&)>& each_step = {}) {
  const int n_steps = int(std::lround(cfg.evolve.duration / cfg.tdqmc.dt));
  const int k = cfg.tdqmc.trajectories;
  const std::size_t runs = fields.size();
  std::vector<TdqmcEnsemble> ens(runs, ground);
  std::vector<TdqmcEvolution> out(runs);
  std::vector<std::vector<Eigen::VectorXd>> rows1(runs), rows2(runs);

  auto record = [&](std::size_t r, int step) {
    TdqmcEnsemble& e = ens[r];
    if (step % cfg.tdqmc.snapshot_stride == 0) {
      const std::vector<Estimate> d = tdqmc_dipole(e);
      out[r].dipoles.push(e.time, d[0].value, d[1].value);
      out[r].err1.push_back(d[0].error);
      out[r].err2.push_back(d[1].error);
      out[r].trajectories.times.push_back(e.time);
      rows1[r].push_back(e.electrons[0].walkers.head(k));
      rows2[r].push_back(e.electrons[1].walkers.head(k));
    }
    if (entropy && step % cfg.tdqmc.entropy_stride == 0)
      out[r].entropy.push(e.time, linear_entropy(reduced_density_tdqmc(e, 0)));
  };

  for (std::size_t r = 0; r < runs; ++r) {
    ens[r].time = 0.0;
    out[r].entropy.label = tdqmc_label(ground.electrons[0].sigma);
    record(r, 0);
  }
  for (int s = 1; s <= n_steps; ++s) {
    for (std::size_t r = 0; r < runs; ++r) {
      out[r].flagged += real_time_step(ens[r], sys, fields[r], cfg.tdqmc.dt);
      record(r, s);
    }
    if (each_step) each_step(ens);
  }
  for (std::size_t r = 0; r < runs; ++r) {
    TrajectorySet& t = out[r].trajectories;
    t.x1.resize(Eigen::Index(rows1[r].size()), k);
    t.x2.resize(Eigen::Index(rows2[r].size()), k);
    for (std::size_t i = 0; i < rows1[r].size(); ++i) {
      t.x1.row(Eigen::Index(i)) = rows1[r][i].transpose();
      t.x2.row(Eigen::Index(i)) = rows2[r][i].transpose();
    }
    t.terminated.assign(std::size_t(k), false);
    t.guarded_samples.assign(std::size_t(k), 0);
    for (int j = 0; j < k; ++j)
      t.terminated[j] = ens[r].electrons[0].edge_flags[j] != 0 ||
                        ens[r].electrons[1].edge_flags[j] != 0;
  }
  return out;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw ValidationError("series lengths differ (" + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()) + ")");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Largest |a - b| / |b| over times present in both series with t >= 0.
double max_relative_gap(const EntropySeries& a, const EntropySeries& b) {
  std::map<long long, double> ref;
  for (std::size_t i = 0; i < b.size(); ++i)
    ref[std::llround(b.times[i] * 1e9)] = b.values[i];
  double worst = 0.0;
  int matched = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.times[i] < -1e-12) continue;
    const auto it = ref.find(std::llround(a.times[i] * 1e9));
    if (it == ref.end()) continue;
    ++matched;
    worst = std::max(worst, std::abs(a.values[i] - it->second) / std::abs(it->second));
  }
  if (matched == 0) throw ValidationError("entropy series share no time points");
  return worst;
}

double relative(double a, double b) { return std::abs(a - b) / std::abs(b); }

CsvTable density_table(const WaveFunction2D& psi) {
  CsvTable t{{"x1", "x2", "rho"}, {}};
  const Eigen::ArrayXd x1 = psi.grid.axis1.points();
  const Eigen::ArrayXd x2 = psi.grid.axis2.points();
  t.rows.reserve(std::size_t(psi.grid.size()));
  for (Eigen::Index i = 0; i < x1.size(); ++i)
    for (Eigen::Index j = 0; j < x2.size(); ++j)
      t.rows.push_back({x1(i), x2(j), std::norm(psi.amplitudes(i, j))});
  return t;
}

CsvTable trace_table(const ExactGround& g) {
  CsvTable t{{"tau", "E"}, {}};
  for (std::size_t i = 0; i < g.taus.size(); ++i) t.rows.push_back({g.taus[i], g.energies[i]});
  return t;
}

CsvTable tdqmc_dipole_table(const TdqmcEvolution& e) {
  CsvTable t{{"t", "d1", "d2", "stderr1", "stderr2"}, {}};
  for (std::size_t i = 0; i < e.dipoles.size(); ++i)
    t.rows.push_back({e.dipoles.times[i], e.dipoles.d1[i], e.dipoles.d2[i],
                      e.err1[i], e.err2[i]});
  return t;
}

/// Writes files below output_dir/name and keeps the manifest.
class Emitter {
 public:
  Emitter(const RunConfig& cfg, const std::string& name)
      : dir_(cfg.output_dir / name), force_(cfg.force), scripts_(cfg.plot_scripts) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create " + dir_.string() + ": " + ec.message());
    if (!force_ && fs::exists(report_path()))
      throw IoError(report_path().string() +
                    " already exists (use --force to overwrite)");
  }

  fs::path report_path() const { return dir_ / "report.txt"; }

  void csv(const CsvTable& table, const std::string& file, const std::string& title) {
    const auto written = emit_plot_data(table, dir_ / file, {force_, scripts_, title});
    files.insert(files.end(), written.begin(), written.end());
  }

  template <class State>
  void checkpoint(const State& state, const std::string& file) {
    const fs::path p = dir_ / file;
    if (!force_ && fs::exists(p))
      throw IoError(p.string() + " already exists (use --force to overwrite)");
    checkpoint_save(state, p);
    files.push_back(p);
  }

  void finish(ScenarioReport& report) {
    Summary s{{"scenario", report.scenario},
              {"seed", std::to_string(report.seed)},
              {"runtime_seconds", format_number(report.runtime_seconds)}};
    for (const auto& [k, v] : report.headline) s.emplace_back(k, format_number(v));
    for (const auto& f : files) s.emplace_back("file", f.filename().string());
    files.push_back(write_summary(s, report_path(), force_));
    report.files = files;
  }

  std::vector<fs::path> files;

 private:
  fs::path dir_;
  bool force_;
  bool scripts_;
};

void require_first_driven(const RunConfig& cfg) {
  if (cfg.field.driven != DrivenElectrons::first)
    throw ValidationError("field.driven must be 'first'; electron 2 is the idler");
}

// ---------------------------------------------------------------------------
// Pipelines

void sweep_pipeline(const RunConfig& cfg, ScenarioContext& ctx, Emitter& out,
                    ScenarioReport& rep) {
  SweepOptions o = cfg.sweep_options();
  o.progress = [&](const SweepRow& r) {
    say(ctx, "sweep sigma " + format_number(r.sigma) + ": E2 " +
                 format_number(r.energy) + " +- " + format_number(r.error));
  };
  const SweepTable table =
      staged("sigma sweep", [&] { return sigma_sweep(cfg.sweep.sigmas, cfg.system, o); });
  out.csv(to_table(table), "sweep.csv", "TDQMC energy versus sigma");
  const FitResult fit =
      staged("polynomial fit", [&] { return polyfit_min(table, cfg.sweep.degree); });
  const auto [lo, hi] =
      std::minmax_element(cfg.sweep.sigmas.begin(), cfg.sweep.sigmas.end());
  out.csv(fit_curve(fit, *lo, *hi, 201), "fit.csv", "fitted energy curve");

  const auto good = table.converged_rows();
  const auto best = std::min_element(good.begin(), good.end(), [](auto& a, auto& b) {
    return a.energy < b.energy;
  });
  rep.set("sigma_star", fit.sigma_star);
  rep.set("e_star", fit.e_star);
  rep.set("fit_residual", fit.residual_norm);
  rep.set("fit_condition", fit.condition_number);
  rep.set("fit_unique_minimum", fit.unique_minimum);
  rep.set("converged_points", double(good.size()));
  rep.set("raw_min_sigma", best->sigma);
  rep.set("raw_min_energy", best->energy);
}

void exact_ground_outputs(const ExactGround& g, Emitter& out, ScenarioReport& rep,
                          const std::string& prefix) {
  out.csv(trace_table(g), prefix + "energy_trace.csv", "exact relaxation energy");
  out.checkpoint(g.psi, prefix + "ground.ckpt");
  rep.set("e_exact", g.energy);
  rep.set("relax_steps", g.steps);
  rep.set("relax_converged", g.converged);
}

void fig1bc(const RunConfig& cfg, ScenarioContext& ctx, Emitter& out,
            ScenarioReport& rep) {
  const auto g = exact_ground(cfg, cfg.system, ctx);
  exact_ground_outputs(*g, out, rep, "");
  out.csv(density_table(g->psi), "density_ground.csv", "ground-state density");
  say(ctx, "exact driven evolution");
  const ExactEvolution ev = staged("exact driven evolution", [&] {
    return exact_evolve(g->psi, cfg.system, cfg.field_spec(), cfg, {}, false, true);
  });
  out.csv(density_table(*ev.final_state), "density_driven.csv",
          "density after the drive");
  out.csv(to_table(ev.dipoles), "dipole.csv", "dipole moments");
  rep.set("final_time", ev.final_state->time);
  rep.set("final_d1", ev.dipoles.d1.back());
  rep.set("final_d2", ev.dipoles.d2.back());
  rep.set("max_abs_d1", max_abs(ev.dipoles.d1));
}

struct ExactPair {
  ExactEvolution driven;
  ExactEvolution reference;
  DipoleSeries dipoles;  // driven minus reference
  TrajectorySet trajectories;
};

ExactPair exact_pair(const WaveFunction2D& ground, const SystemSpec& sys,
                     const RunConfig& cfg, const std::vector<Point2>& starts,
                     bool entropy, ScenarioContext& ctx, const std::string& what) {
  ExactPair p;
  say(ctx, what + ": exact driven run");
  p.driven = staged(what + " exact driven run", [&] {
    return exact_evolve(ground, sys, cfg.field_spec(DrivenElectrons::first), cfg,
                        starts, entropy, false);
  });
  say(ctx, what + ": exact field-free run");
  p.reference = staged(what + " exact field-free run", [&] {
    return exact_evolve(ground, sys, FieldSpec::none(), cfg, starts, false, false);
  });
  p.dipoles = subtract_reference(p.driven.dipoles, p.reference.dipoles);
  p.trajectories = subtract_reference(p.driven.trajectories, p.reference.trajectories);
  return p;
}

std::string nonint_key(const RunConfig& cfg) {
  std::ostringstream k;
  k.precision(17);
  k << exact_key(cfg, cfg.system) << ' ' << cfg.seed << ' ' << cfg.exact.dt << ' '
    << cfg.exact.snapshot_stride << ' ' << cfg.exact.trajectories << ' '
    << cfg.exact.edge_limit << ' ' << cfg.evolve.duration << ' '
    << cfg.field.amplitude << ' ' << cfg.field.omega << ' ' << cfg.field.phase;
  return k.str();
}

void fig2(const RunConfig& cfg, ScenarioContext& ctx, Emitter& out,
          ScenarioReport& rep) {
  require_first_driven(cfg);
  const SystemSpec off = with_interaction(cfg.system, false);
  const FieldSpec field = cfg.field_spec(DrivenElectrons::first);

  // Exact solver: interacting ground state, interaction switched off for t > 0.
  const auto g = exact_ground(cfg, cfg.system, ctx);
  const auto g0 = exact_ground(cfg, off, ctx);
  rep.set("e_exact", g->energy);
  rep.set("e_exact_noninteracting", g0->energy);
  const std::vector<Point2> starts = trajectory_starts(cfg, g->psi);
  const ExactPair ex = exact_pair(g->psi, off, cfg, starts, true, ctx, "fig2");
  ctx.cache().nonint_idler[nonint_key(cfg)] = ex.trajectories;

  const double sample_dt = cfg.exact.dt * cfg.exact.snapshot_stride;
  const DipoleSeries oracle = ehrenfest_oracle(field, cfg.system.confinement_strength,
                                               cfg.evolve.duration, sample_dt);
  rep.set("exact_dipole_max_error", max_abs_diff(ex.driven.dipoles.d1, oracle.d1));
  rep.set("exact_idler_dipole_max", max_abs(ex.driven.dipoles.d2));
  rep.set("exact_idler_dipole_max_subtracted", max_abs(ex.dipoles.d2));
  rep.set("exact_idler_excursion_max", max_idler_excursion(ex.driven.trajectories));
  rep.set("exact_idler_excursion_subtracted", max_idler_excursion(ex.trajectories));
  out.csv(to_table(ex.driven.dipoles), "exact_dipole.csv", "exact dipoles");
  out.csv(to_table(ex.dipoles), "exact_dipole_subtracted.csv",
          "exact dipoles minus field-free run");
  out.csv(to_table(oracle), "oracle_dipole.csv", "classical driven oscillator");
  if (ex.driven.trajectories.count() > 0) {
    out.csv(to_table(ex.driven.trajectories), "exact_trajectories.csv",
            "exact Bohmian trajectories");
    out.csv(to_table(ex.trajectories), "exact_trajectories_subtracted.csv",
            "exact trajectories minus field-free run");
  }

  // TDQMC: same protocol, driven and field-free ensembles stepped together.
  const auto tg = tdqmc_ground(cfg, cfg.system, cfg.tdqmc.sigma, ctx);
  const EnergyEstimate& e = tg->result.energy;
  rep.set("tdqmc_e1", e.mixed.value);
  rep.set("tdqmc_e1_stderr", e.mixed.error);
  rep.set("tdqmc_e2", e.wave.value);
  rep.set("tdqmc_e2_stderr", e.wave.error);
  rep.set("tdqmc_estimator_gap", relative(e.mixed.value, e.wave.value));
  out.csv(to_table(tg->result.history), "tdqmc_energy.csv", "TDQMC ground-state energy");

  bool identical = true;
  double motion = 0.0;
  say(ctx, "fig2: TDQMC driven and field-free runs");
  const auto runs = staged("fig2 TDQMC evolution", [&] {
    return tdqmc_evolve(tg->ensemble, off, {field, FieldSpec::none()}, cfg, true,
                        [&](const std::vector<TdqmcEnsemble>& ens) {
                          const ElectronEnsemble& a = ens[0].electrons[1];
                          const ElectronEnsemble& b = ens[1].electrons[1];
                          identical = identical &&
                                      (a.waves.array() == b.waves.array()).all() &&
                                      (a.velocity.array() == b.velocity.array()).all() &&
                                      (a.walkers.array() == b.walkers.array()).all();
                          motion = std::max(motion,
                                            (a.walkers - b.walkers).cwiseAbs().maxCoeff());
                        });
  });
  const TdqmcEvolution& drv = runs[0];
  const DipoleSeries toracle = ehrenfest_oracle(
      field, cfg.system.confinement_strength, cfg.evolve.duration,
      cfg.tdqmc.dt * cfg.tdqmc.snapshot_stride);
  double excess = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < drv.dipoles.size(); ++i)
    excess = std::max(excess, std::abs(drv.dipoles.d1[i] - toracle.d1.at(i)) -
                                  3.0 * drv.err1[i]);
  rep.set("tdqmc_dipole_max_error", max_abs_diff(drv.dipoles.d1, toracle.d1));
  rep.set("tdqmc_dipole_max_stderr", max_abs(drv.err1));
  rep.set("tdqmc_dipole_excess", excess);
  rep.set("tdqmc_idler_motion_max", motion);
  rep.set("tdqmc_idler_bit_identical", identical);
  rep.set("tdqmc_flagged_walkers", drv.flagged + runs[1].flagged);
  out.csv(tdqmc_dipole_table(drv), "tdqmc_dipole.csv", "TDQMC dipoles");
  if (drv.trajectories.count() > 0)
    out.csv(to_table(drv.trajectories), "tdqmc_trajectories.csv", "TDQMC walkers");

  // Entropy: relaxation buildup followed by the driven evolution.
  EntropySeries s_exact = g->entropy;
  for (std::size_t i = 1; i < ex.driven.entropy.size(); ++i)
    s_exact.push(ex.driven.entropy.times[i], ex.driven.entropy.values[i]);
  EntropySeries s_tdqmc = tg->entropy;
  for (std::size_t i = 1; i < drv.entropy.size(); ++i)
    s_tdqmc.push(drv.entropy.times[i], drv.entropy.values[i]);
  out.csv(to_table(std::vector<EntropySeries>{s_exact, s_tdqmc}), "entropy.csv",
          "linear entropy");
  const double p_exact = g->entropy.values.back();
  const double p_tdqmc = tg->entropy.values.back();
  rep.set("s_exact_plateau", p_exact);
  rep.set("s_tdqmc_plateau", p_tdqmc);
  rep.set("s_plateau_rel_diff", relative(p_tdqmc, p_exact));
  rep.set("s_max_rel_diff", max_relative_gap(s_tdqmc, s_exact));
}

void fig3(const RunConfig& cfg, ScenarioContext& ctx, Emitter& out,
          ScenarioReport& rep) {
  require_first_driven(cfg);
  const SystemSpec& sys = cfg.system;
  const auto g = exact_ground(cfg, sys, ctx);
  rep.set("e_exact", g->energy);
  const std::vector<Point2> starts = trajectory_starts(cfg, g->psi);

  // (a) interacting idler response against the non-interacting one.
  const ExactPair ex = exact_pair(g->psi, sys, cfg, starts, false, ctx, "fig3");
  rep.set("exact_idler_dipole_max_subtracted", max_abs(ex.dipoles.d2));
  rep.set("exact_idler_excursion_subtracted", max_idler_excursion(ex.trajectories));
  out.csv(to_table(ex.driven.dipoles), "exact_dipole.csv", "exact dipoles");
  out.csv(to_table(ex.dipoles), "exact_dipole_subtracted.csv",
          "exact dipoles minus field-free run");
  if (ex.trajectories.count() > 0)
    out.csv(to_table(ex.trajectories), "exact_trajectories_subtracted.csv",
            "exact trajectories minus field-free run");

  auto& nonint = ctx.cache().nonint_idler;
  const std::string key = nonint_key(cfg);
  if (!nonint.count(key)) {
    const SystemSpec off = with_interaction(sys, false);
    nonint[key] = exact_pair(g->psi, off, cfg, starts, false, ctx, "fig3 non-interacting")
                      .trajectories;
  }
  const IdlerRatio ratio = idler_ratio(ex.dipoles, nonint.at(key));
  rep.set("idler_ratio", ratio.infinite ? std::numeric_limits<double>::infinity()
                                        : ratio.ratio);
  rep.set("idler_ratio_numerator", ratio.numerator);
  rep.set("idler_ratio_denominator", ratio.denominator);
  rep.set("idler_ratio_infinite", ratio.infinite);

  const auto tg = tdqmc_ground(cfg, sys, cfg.tdqmc.sigma, ctx);
  say(ctx, "fig3: TDQMC driven and field-free runs");
  const auto runs = staged("fig3 TDQMC evolution", [&] {
    return tdqmc_evolve(tg->ensemble, sys,
                        {cfg.field_spec(DrivenElectrons::first), FieldSpec::none()},
                        cfg, false);
  });
  const DipoleSeries tsub = subtract_reference(runs[0].dipoles, runs[1].dipoles);
  rep.set("tdqmc_idler_dipole_max_subtracted", max_abs(tsub.d2));
  out.csv(tdqmc_dipole_table(runs[0]), "tdqmc_dipole.csv", "TDQMC dipoles");
  out.csv(to_table(tsub), "tdqmc_dipole_subtracted.csv",
          "TDQMC dipoles minus field-free run");

  // (b) both electrons driven; entropy for the exact solver and several sigma.
  const FieldSpec both = cfg.field_spec(DrivenElectrons::both);
  say(ctx, "fig3: exact run with both electrons driven");
  const ExactEvolution eb = staged("fig3 exact run, both driven", [&] {
    return exact_evolve(g->psi, sys, both, cfg, {}, true, false);
  });
  std::vector<EntropySeries> curves;
  EntropySeries s_exact = g->entropy;
  for (std::size_t i = 1; i < eb.entropy.size(); ++i)
    s_exact.push(eb.entropy.times[i], eb.entropy.values[i]);
  curves.push_back(s_exact);
  rep.set("s_exact_plateau", g->entropy.values.back());

  std::vector<double> sigmas{cfg.tdqmc.sigma};
  for (double s : cfg.tdqmc.sigma_compare)
    if (s != cfg.tdqmc.sigma) sigmas.push_back(s);
  double p_ref = 0.0;
  for (double sigma : sigmas) {
    const auto tgs = tdqmc_ground(cfg, sys, sigma, ctx);
    say(ctx, "fig3: TDQMC run with both electrons driven, sigma " + format_number(sigma));
    const auto run = staged("fig3 TDQMC run, both driven", [&] {
      return tdqmc_evolve(tgs->ensemble, sys, {both}, cfg, true);
    });
    EntropySeries s = tgs->entropy;
    for (std::size_t i = 1; i < run[0].entropy.size(); ++i)
      s.push(run[0].entropy.times[i], run[0].entropy.values[i]);
    const std::string tag = tdqmc_label(sigma).substr(6);
    const double plateau = tgs->entropy.values.back();
    rep.set("s_tdqmc_plateau_" + tag, plateau);
    if (sigma == cfg.tdqmc.sigma) {
      p_ref = plateau;
      rep.set("s_max_rel_diff", max_relative_gap(s, s_exact));
    } else {
      rep.set("s_rel_diff_" + tag, relative(plateau, p_ref));
    }
    curves.push_back(std::move(s));
  }
  out.csv(to_table(curves), "entropy.csv", "linear entropy, both electrons driven");
}

void ground_exact_task(const RunConfig& cfg, ScenarioContext& ctx, Emitter& out,
                       ScenarioReport& rep) {
  const auto g = exact_ground(cfg, cfg.system, ctx);
  exact_ground_outputs(*g, out, rep, "");
  out.csv(to_table(std::vector<EntropySeries>{g->entropy}), "entropy.csv",
          "linear entropy buildup");
  rep.set("s_exact_plateau", g->entropy.values.back());
}

void ground_tdqmc_task(const RunConfig& cfg, ScenarioContext& ctx, Emitter& out,
                       ScenarioReport& rep) {
  const auto tg = tdqmc_ground(cfg, cfg.system, cfg.tdqmc.sigma, ctx);
  const EnergyEstimate& e = tg->result.energy;
  rep.set("tdqmc_e1", e.mixed.value);
  rep.set("tdqmc_e1_stderr", e.mixed.error);
  rep.set("tdqmc_e2", e.wave.value);
  rep.set("tdqmc_e2_stderr", e.wave.error);
  rep.set("tdqmc_estimator_gap", relative(e.mixed.value, e.wave.value));
  rep.set("stage2_steps", tg->result.stage2_steps);
  rep.set("s_tdqmc_plateau", tg->entropy.values.back());
  out.csv(to_table(tg->result.history), "tdqmc_energy.csv", "TDQMC ground-state energy");
  out.csv(to_table(std::vector<EntropySeries>{tg->entropy}), "entropy.csv",
          "linear entropy buildup");
  out.checkpoint(tg->ensemble, "ensemble.ckpt");
}

void evolve_task(const RunConfig& cfg, ScenarioContext& ctx, Emitter& out,
                 ScenarioReport& rep) {
  const FieldSpec field = cfg.field_spec();
  if (cfg.solver != SolverChoice::tdqmc) {
    const auto g = exact_ground(cfg, cfg.system, ctx);
    say(ctx, "exact evolution");
    const ExactEvolution ev = staged("exact evolution", [&] {
      return exact_evolve(g->psi, cfg.system, field, cfg,
                          trajectory_starts(cfg, g->psi), false, true);
    });
    out.csv(to_table(ev.dipoles), "exact_dipole.csv", "exact dipoles");
    if (ev.trajectories.count() > 0)
      out.csv(to_table(ev.trajectories), "exact_trajectories.csv",
              "exact Bohmian trajectories");
    out.checkpoint(*ev.final_state, "exact_final.ckpt");
    rep.set("e_exact", g->energy);
    rep.set("exact_max_abs_d1", max_abs(ev.dipoles.d1));
    rep.set("exact_max_abs_d2", max_abs(ev.dipoles.d2));
  }
  if (cfg.solver != SolverChoice::exact) {
    const auto tg = tdqmc_ground(cfg, cfg.system, cfg.tdqmc.sigma, ctx);
    say(ctx, "TDQMC evolution");
    const auto run = staged("TDQMC evolution", [&] {
      return tdqmc_evolve(tg->ensemble, cfg.system, {field}, cfg, false);
    });
    out.csv(tdqmc_dipole_table(run[0]), "tdqmc_dipole.csv", "TDQMC dipoles");
    if (run[0].trajectories.count() > 0)
      out.csv(to_table(run[0].trajectories), "tdqmc_trajectories.csv",
              "TDQMC walkers");
    rep.set("tdqmc_e2", tg->result.energy.wave.value);
    rep.set("tdqmc_max_abs_d1", max_abs(run[0].dipoles.d1));
    rep.set("tdqmc_max_abs_d2", max_abs(run[0].dipoles.d2));
    rep.set("tdqmc_flagged_walkers", run[0].flagged);
  }
}

void entropy_task(const RunConfig& cfg, ScenarioContext& ctx, Emitter& out,
                  ScenarioReport& rep) {
  const FieldSpec field = cfg.field_spec();
  std::vector<EntropySeries> curves;
  if (cfg.solver != SolverChoice::tdqmc) {
    const auto g = exact_ground(cfg, cfg.system, ctx);
    say(ctx, "exact evolution");
    const ExactEvolution ev = staged("exact evolution", [&] {
      return exact_evolve(g->psi, cfg.system, field, cfg, {}, true, false);
    });
    EntropySeries s = g->entropy;
    for (std::size_t i = 1; i < ev.entropy.size(); ++i)
      s.push(ev.entropy.times[i], ev.entropy.values[i]);
    rep.set("s_exact_plateau", g->entropy.values.back());
    curves.push_back(std::move(s));
  }
  if (cfg.solver != SolverChoice::exact) {
    std::vector<double> sigmas{cfg.tdqmc.sigma};
    for (double s : cfg.tdqmc.sigma_compare)
      if (s != cfg.tdqmc.sigma) sigmas.push_back(s);
    for (double sigma : sigmas) {
      const auto tg = tdqmc_ground(cfg, cfg.system, sigma, ctx);
      say(ctx, "TDQMC evolution, sigma " + format_number(sigma));
      const auto run = staged("TDQMC evolution", [&] {
        return tdqmc_evolve(tg->ensemble, cfg.system, {field}, cfg, true);
      });
      EntropySeries s = tg->entropy;
      for (std::size_t i = 1; i < run[0].entropy.size(); ++i)
        s.push(run[0].entropy.times[i], run[0].entropy.values[i]);
      rep.set("s_tdqmc_plateau_" + tdqmc_label(sigma).substr(6),
              tg->entropy.values.back());
      curves.push_back(std::move(s));
    }
  }
  out.csv(to_table(curves), "entropy.csv", "linear entropy");
}

using Pipeline = void (*)(const RunConfig&, ScenarioContext&, Emitter&,
                          ScenarioReport&);

ScenarioReport execute(const std::string& name, Pipeline pipeline,
                       const RunConfig& cfg, ScenarioContext* context) {
  cfg.validate();
  ScenarioContext local;
  ScenarioContext& ctx = context ? *context : local;
  const auto start = std::chrono::steady_clock::now();
  ScenarioReport rep;
  rep.scenario = name;
  rep.seed = cfg.seed;
  Emitter out(cfg, name);
  staged(name, [&] { pipeline(cfg, ctx, out, rep); });
  rep.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.finish(rep);
  return rep;
}

std::string list(const std::vector<std::string>& names) {
  std::string s;
  for (const auto& n : names) s += (s.empty() ? "" : ", ") + n;
  return s;
}

}  // namespace

ScenarioReport run_scenario(const std::string& name, const RunConfig& config,
                            ScenarioContext* context) {
  static const std::map<std::string, Pipeline> table{
      {"fig1a", sweep_pipeline}, {"fig1bc", fig1bc}, {"fig2", fig2}, {"fig3", fig3}};
  const auto it = table.find(name);
  if (it == table.end())
    throw ValidationError("unknown scenario '" + name +
                          "'; available: " + list(scenario_names()));
  return execute(name, it->second, config, context);
}

const std::vector<std::string>& task_names() {
  static const std::vector<std::string> names{"ground-exact", "ground-tdqmc", "sweep",
                                              "evolve", "entropy"};
  return names;
}

ScenarioReport run_task(const std::string& name, const RunConfig& config,
                        ScenarioContext* context) {
  static const std::map<std::string, Pipeline> table{
      {"ground-exact", ground_exact_task},
      {"ground-tdqmc", ground_tdqmc_task},
      {"sweep", sweep_pipeline},
      {"evolve", evolve_task},
      {"entropy", entropy_task}};
  const auto it = table.find(name);
  if (it == table.end())
    throw ValidationError("unknown task '" + name + "'; available: " + list(task_names()));
  return execute(name, it->second, config, context);
}

}  // namespace qnl
