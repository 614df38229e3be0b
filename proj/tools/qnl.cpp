// Command-line front end. Settings are layered: built-in defaults, then the
// --config file, then QNL_OUTPUT_DIR, then command-line flags.
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "qnl/config.hpp"
#include "qnl/output.hpp"
#include "qnl/scenario.hpp"

namespace {

enum Exit { kOk = 0, kValidation = 1, kNumerical = 2, kIo = 3 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool force = false;
  bool quiet = false;
  bool print_config = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON config file");
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_flag("--force", c.force, "overwrite existing outputs");
  cmd->add_flag("-q,--quiet", c.quiet, "no progress messages");
  cmd->add_flag("--print-config", c.print_config,
                "print the effective config and exit");
}

qnl::RunConfig effective_config(const Common& c) {
  qnl::RunConfig cfg = c.config.empty() ? qnl::RunConfig{} : qnl::parse_config(c.config);
  if (const char* env = std::getenv(qnl::kOutputDirEnv); env && *env)
    cfg.output_dir = env;
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (c.force) cfg.force = true;
  cfg.validate();
  return cfg;
}

void print(const qnl::ScenarioReport& r) {
  std::cout << "scenario = " << r.scenario << '\n'
            << "seed = " << r.seed << '\n'
            << "runtime_seconds = " << qnl::format_number(r.runtime_seconds) << '\n';
  for (const auto& [k, v] : r.headline)
    std::cout << k << " = " << qnl::format_number(v) << '\n';
  for (const auto& f : r.files) std::cout << "file = " << f.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-electron exact and TDQMC simulations"};
  app.require_subcommand(1);
  Common common;
  std::string scenario;

  const std::pair<const char*, const char*> tasks[] = {
      {"ground-exact", "relax the two-body ground state"},
      {"ground-tdqmc", "prepare the TDQMC ground-state ensemble"},
      {"sweep", "TDQMC energy versus sigma with a polynomial fit"},
      {"evolve", "driven real-time evolution"},
      {"entropy", "linear entropy through relaxation and evolution"}};
  for (const auto& [name, help] : tasks) add_common(app.add_subcommand(name, help), common);
  CLI::App* sc = app.add_subcommand("scenario", "run a named figure pipeline");
  sc->add_option("name", scenario, "fig1a, fig1bc, fig2 or fig3")->required();
  add_common(sc, common);

  CLI11_PARSE(app, argc, argv);
  const std::string task = app.get_subcommands().front()->get_name();

  try {
    qnl::RunConfig cfg = effective_config(common);
    if (task == "scenario") cfg.scenario = scenario;
    if (common.print_config) {
      std::cout << qnl::serialize(cfg) << '\n';
      return kOk;
    }
    qnl::ScenarioContext ctx;
    if (!common.quiet)
      ctx.log = [start = std::chrono::steady_clock::now()](std::string_view msg) {
        const std::chrono::duration<double> t = std::chrono::steady_clock::now() - start;
        std::cerr << "[qnl " << std::fixed << std::setprecision(1) << t.count() << "s] "
                  << msg << std::endl;
      };
    const qnl::ScenarioReport report = task == "scenario"
                                           ? qnl::run_scenario(scenario, cfg, &ctx)
                                           : qnl::run_task(task, cfg, &ctx);
    print(report);
    return kOk;
  } catch (const qnl::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const qnl::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const qnl::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  }
}
