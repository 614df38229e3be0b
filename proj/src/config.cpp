#include "qnl/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace qnl {
namespace {

using nlohmann::json;

template <typename E>
struct EnumNames {
  std::vector<std::pair<E, const char*>> items;

  const char* name(E v) const {
    for (const auto& [e, n] : items)
      if (e == v) return n;
    return "?";
  }
  E value(const std::string& s, const std::string& path) const {
    for (const auto& [e, n] : items)
      if (s == n) return e;
    std::string opts;
    for (const auto& [e, n] : items) opts += (opts.empty() ? "" : ", ") + std::string(n);
    throw ValidationError(path + ": unknown value '" + s + "' (expected one of " +
                          opts + ")");
  }
};

const EnumNames<DrivenElectrons> kDriven{{{DrivenElectrons::first, "first"},
                                          {DrivenElectrons::second, "second"},
                                          {DrivenElectrons::both, "both"}}};
const EnumNames<SolverChoice> kSolver{{{SolverChoice::exact, "exact"},
                                       {SolverChoice::tdqmc, "tdqmc"},
                                       {SolverChoice::both, "both"}}};
const EnumNames<SeedPolicy> kSeeds{{{SeedPolicy::common, "common"},
                                    {SeedPolicy::independent, "independent"}}};

// Walks one JSON object, remembering which keys were consumed.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object())
      throw ValidationError(where() + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    const std::string p = child_path(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ValidationError(p + ": expected true or false");
      out = v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer())
        throw ValidationError(p + ": expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned() || v.get<long long>() >= 0)
          out = v.get<T>();
        else
          throw ValidationError(p + ": expected a non-negative integer");
      } else {
        out = v.get<T>();
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ValidationError(p + ": expected a number");
      out = v.get<double>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ValidationError(p + ": expected a string");
      out = v.get<std::string>();
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      if (!v.is_array()) throw ValidationError(p + ": expected an array");
      out.clear();
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number())
          throw ValidationError(p + "[" + std::to_string(i) +
                                "]: expected a number");
        out.push_back(v[i].get<double>());
      }
    }
  }

  template <typename E>
  void get_enum(const char* key, E& out, const EnumNames<E>& names) {
    std::string s = names.name(out);
    get(key, s);
    out = names.value(s, child_path(key));
  }

  template <typename F>
  void section(const char* key, F&& fill) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    Reader sub(j_.at(key), child_path(key));
    fill(sub);
    sub.finish();
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key))
        throw ValidationError(child_path(key) + ": unknown key");
  }

 private:
  std::string where() const { return path_.empty() ? "<root>" : path_; }
  std::string child_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ValidationError(key + ": " + what);
}

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"fig1a", "fig1bc", "fig2", "fig3"};
  return names;
}

void RunConfig::validate() const {
  require(system.n_electrons == 2, "system.n_electrons", "must be 2");
  require(system.confinement_strength > 0, "system.confinement_strength",
          "must be positive");
  require(system.softcore_a > 0, "system.softcore_a", "must be positive");

  require(grid.points >= 8 && is_power_of_two(grid.points), "grid.points",
          "must be a power of two >= 8");
  require(grid.span > 0, "grid.span", "must be positive");

  require(std::isfinite(field.amplitude), "field.amplitude", "must be finite");
  require(field.omega > 0, "field.omega", "must be positive");
  require(std::isfinite(field.phase), "field.phase", "must be finite");

  require(exact.dtau > 0, "exact.dtau", "must be positive");
  require(exact.dt > 0, "exact.dt", "must be positive");
  require(exact.energy_tol > 0, "exact.energy_tol", "must be positive");
  require(exact.check_stride >= 1, "exact.check_stride", "must be >= 1");
  require(exact.max_steps >= 1, "exact.max_steps", "must be >= 1");
  require(exact.initial_width > 0, "exact.initial_width", "must be positive");
  require(exact.trajectories >= 0, "exact.trajectories", "must be >= 0");
  require(exact.snapshot_stride >= 1, "exact.snapshot_stride", "must be >= 1");
  require(exact.edge_limit > 0, "exact.edge_limit", "must be positive");

  require(tdqmc.walkers >= 1, "tdqmc.walkers", "must be >= 1");
  require(tdqmc.sigma > 0, "tdqmc.sigma", "must be positive");
  for (std::size_t i = 0; i < tdqmc.sigma_compare.size(); ++i)
    require(tdqmc.sigma_compare[i] > 0,
            "tdqmc.sigma_compare[" + std::to_string(i) + "]", "must be positive");
  require(tdqmc.dtau > 0, "tdqmc.dtau", "must be positive");
  require(tdqmc.dt > 0, "tdqmc.dt", "must be positive");
  require(tdqmc.stage1_steps >= 0, "tdqmc.stage1_steps", "must be >= 0");
  require(tdqmc.stage2_tol > 0, "tdqmc.stage2_tol", "must be positive");
  require(tdqmc.stage2_max_steps >= 1, "tdqmc.stage2_max_steps", "must be >= 1");
  require(tdqmc.record_stride >= 1, "tdqmc.record_stride", "must be >= 1");
  require(tdqmc.initial_width > 0, "tdqmc.initial_width", "must be positive");
  require(tdqmc.diffusion >= 0, "tdqmc.diffusion", "must be >= 0");
  require(tdqmc.snapshot_stride >= 1, "tdqmc.snapshot_stride", "must be >= 1");
  require(tdqmc.entropy_stride >= 1, "tdqmc.entropy_stride", "must be >= 1");
  require(tdqmc.trajectories >= 0 && tdqmc.trajectories <= tdqmc.walkers,
          "tdqmc.trajectories", "must lie in [0, tdqmc.walkers]");

  require(evolve.duration > 0, "evolve.duration", "must be positive");

  require(!sweep.sigmas.empty(), "sweep.sigmas", "must not be empty");
  for (std::size_t i = 0; i < sweep.sigmas.size(); ++i)
    require(sweep.sigmas[i] > 0, "sweep.sigmas[" + std::to_string(i) + "]",
            "must be positive");
  std::vector<double> s = sweep.sigmas;
  std::sort(s.begin(), s.end());
  require(std::adjacent_find(s.begin(), s.end()) == s.end(), "sweep.sigmas",
          "values must be distinct");
  require(sweep.degree >= 1, "sweep.degree", "must be >= 1");

  require(std::find(scenario_names().begin(), scenario_names().end(),
                    scenario) != scenario_names().end(),
          "scenario", "unknown scenario '" + scenario + "'");
  require(!output_dir.empty(), "output_dir", "must not be empty");
}

FieldSpec RunConfig::field_spec() const { return field_spec(field.driven); }

FieldSpec RunConfig::field_spec(DrivenElectrons driven) const {
  const Drive d{field.amplitude, field.omega, field.phase, 0.0};
  FieldSpec f;
  f.drives.resize(2);
  if (driven != DrivenElectrons::second) f.drives[0] = d;
  if (driven != DrivenElectrons::first) f.drives[1] = d;
  return f;
}

ImaginaryStepParams RunConfig::imaginary_step() const {
  return {tdqmc.dtau, tdqmc.diffusion, tdqmc.drift};
}

GroundStateOptions RunConfig::ground_options() const {
  GroundStateOptions o;
  o.step = imaginary_step();
  o.stage1_steps = tdqmc.stage1_steps;
  o.stage2_tol = tdqmc.stage2_tol;
  o.stage2_max_steps = tdqmc.stage2_max_steps;
  o.record_stride = tdqmc.record_stride;
  return o;
}

SweepOptions RunConfig::sweep_options() const {
  SweepOptions o;
  o.grid = grid1d();
  o.walkers = tdqmc.walkers;
  o.initial_width = tdqmc.initial_width;
  o.master_seed = seed;
  o.seeds = sweep.seeds;
  o.ground = ground_options();
  return o;
}

RelaxOptions RunConfig::relax_options() const {
  RelaxOptions o;
  o.check_stride = exact.check_stride;
  o.max_steps = exact.max_steps;
  return o;
}

PropagationSchedule RunConfig::exact_schedule() const {
  PropagationSchedule s;
  s.dt = exact.dt;
  s.n_steps = int(std::lround(evolve.duration / exact.dt));
  s.snapshot_stride = exact.snapshot_stride;
  s.mode = TimeMode::real;
  return s;
}

RunConfig parse_config_text(const std::string& text) {
  json j;
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return RunConfig{};
  try {
    j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  if (j.is_null()) return c;
  Reader root(j, "");
  root.get("seed", c.seed);
  root.get("scenario", c.scenario);
  root.get_enum("solver", c.solver, kSolver);
  std::string out = c.output_dir.string();
  root.get("output_dir", out);
  c.output_dir = out;
  root.get("plot_scripts", c.plot_scripts);
  root.get("force", c.force);
  root.section("system", [&](Reader& r) {
    r.get("confinement_strength", c.system.confinement_strength);
    r.get("softcore_a", c.system.softcore_a);
    r.get("interaction", c.system.interaction_on);
  });
  root.section("grid", [&](Reader& r) {
    r.get("points", c.grid.points);
    r.get("span", c.grid.span);
  });
  root.section("field", [&](Reader& r) {
    r.get("amplitude", c.field.amplitude);
    r.get("omega", c.field.omega);
    r.get("phase", c.field.phase);
    r.get_enum("driven", c.field.driven, kDriven);
  });
  root.section("exact", [&](Reader& r) {
    r.get("dtau", c.exact.dtau);
    r.get("dt", c.exact.dt);
    r.get("energy_tol", c.exact.energy_tol);
    r.get("check_stride", c.exact.check_stride);
    r.get("max_steps", c.exact.max_steps);
    r.get("initial_width", c.exact.initial_width);
    r.get("trajectories", c.exact.trajectories);
    r.get("snapshot_stride", c.exact.snapshot_stride);
    r.get("edge_limit", c.exact.edge_limit);
  });
  root.section("tdqmc", [&](Reader& r) {
    r.get("walkers", c.tdqmc.walkers);
    r.get("sigma", c.tdqmc.sigma);
    r.get("sigma_compare", c.tdqmc.sigma_compare);
    r.get("dtau", c.tdqmc.dtau);
    r.get("dt", c.tdqmc.dt);
    r.get("stage1_steps", c.tdqmc.stage1_steps);
    r.get("stage2_tol", c.tdqmc.stage2_tol);
    r.get("stage2_max_steps", c.tdqmc.stage2_max_steps);
    r.get("record_stride", c.tdqmc.record_stride);
    r.get("initial_width", c.tdqmc.initial_width);
    r.get("drift", c.tdqmc.drift);
    r.get("diffusion", c.tdqmc.diffusion);
    r.get("snapshot_stride", c.tdqmc.snapshot_stride);
    r.get("entropy_stride", c.tdqmc.entropy_stride);
    r.get("trajectories", c.tdqmc.trajectories);
  });
  root.section("evolve", [&](Reader& r) { r.get("duration", c.evolve.duration); });
  root.section("sweep", [&](Reader& r) {
    r.get("sigmas", c.sweep.sigmas);
    r.get("degree", c.sweep.degree);
    r.get_enum("seeds", c.sweep.seeds, kSeeds);
  });
  root.finish();
  c.validate();
  return c;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string serialize(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["scenario"] = c.scenario;
  j["solver"] = kSolver.name(c.solver);
  j["output_dir"] = c.output_dir.string();
  j["plot_scripts"] = c.plot_scripts;
  j["force"] = c.force;
  j["system"] = {{"confinement_strength", c.system.confinement_strength},
                 {"softcore_a", c.system.softcore_a},
                 {"interaction", c.system.interaction_on}};
  j["grid"] = {{"points", c.grid.points}, {"span", c.grid.span}};
  j["field"] = {{"amplitude", c.field.amplitude},
                {"omega", c.field.omega},
                {"phase", c.field.phase},
                {"driven", kDriven.name(c.field.driven)}};
  j["exact"] = {{"dtau", c.exact.dtau},
                {"dt", c.exact.dt},
                {"energy_tol", c.exact.energy_tol},
                {"check_stride", c.exact.check_stride},
                {"max_steps", c.exact.max_steps},
                {"initial_width", c.exact.initial_width},
                {"trajectories", c.exact.trajectories},
                {"snapshot_stride", c.exact.snapshot_stride},
                {"edge_limit", c.exact.edge_limit}};
  j["tdqmc"] = {{"walkers", c.tdqmc.walkers},
                {"sigma", c.tdqmc.sigma},
                {"sigma_compare", c.tdqmc.sigma_compare},
                {"dtau", c.tdqmc.dtau},
                {"dt", c.tdqmc.dt},
                {"stage1_steps", c.tdqmc.stage1_steps},
                {"stage2_tol", c.tdqmc.stage2_tol},
                {"stage2_max_steps", c.tdqmc.stage2_max_steps},
                {"record_stride", c.tdqmc.record_stride},
                {"initial_width", c.tdqmc.initial_width},
                {"drift", c.tdqmc.drift},
                {"diffusion", c.tdqmc.diffusion},
                {"snapshot_stride", c.tdqmc.snapshot_stride},
                {"entropy_stride", c.tdqmc.entropy_stride},
                {"trajectories", c.tdqmc.trajectories}};
  j["evolve"] = {{"duration", c.evolve.duration}};
  j["sweep"] = {{"sigmas", c.sweep.sigmas},
                {"degree", c.sweep.degree},
                {"seeds", kSeeds.name(c.sweep.seeds)}};
  return j.dump(2) + "\n";
}

}  // namespace qnl
