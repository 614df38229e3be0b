// Experiment orchestration: named scenarios reproducing the figure
// pipelines and the single-purpose tasks behind the CLI subcommands.
#ifndef QNL_SCENARIO_HPP
#define QNL_SCENARIO_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qnl/config.hpp"

namespace qnl {

struct ScenarioReport {
  std::string scenario;
  std::uint64_t seed = 0;
  double runtime_seconds = 0.0;
  /// Every file written, report file last.
  std::vector<std::filesystem::path> files;
  /// Headline numbers in insertion order. Flags are stored as 0 or 1.
  std::vector<std::pair<std::string, double>> headline;

  bool has(const std::string& key) const;
  /// Throws ValidationError for a missing key.
  double value(const std::string& key) const;
  /// Inserts or replaces.
  void set(const std::string& key, double value);
};

/// Ground states and reference runs shared between scenarios executed in one
/// process. Entries are keyed by every config field they depend on, so a
/// changed config never sees a stale result.
class ScenarioContext {
 public:
  ScenarioContext();
  ~ScenarioContext();
  ScenarioContext(const ScenarioContext&) = delete;
  ScenarioContext& operator=(const ScenarioContext&) = delete;

  /// Progress messages; silent when empty.
  std::function<void(std::string_view)> log;

  struct Cache;
  Cache& cache() { return *cache_; }

 private:
  std::unique_ptr<Cache> cache_;
};

/// fig1a, fig1bc, fig2, fig3.
ScenarioReport run_scenario(const std::string& name, const RunConfig& config,
                            ScenarioContext* context = nullptr);

/// ground-exact, ground-tdqmc, sweep, evolve, entropy.
const std::vector<std::string>& task_names();
ScenarioReport run_task(const std::string& name, const RunConfig& config,
                        ScenarioContext* context = nullptr);

}  // namespace qnl

#endif  // QNL_SCENARIO_HPP
