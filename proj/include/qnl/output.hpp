// CSV tables for every series type, optional gnuplot companions, and
// key-value summary files.
#ifndef QNL_OUTPUT_HPP
#define QNL_OUTPUT_HPP

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "qnl/analysis.hpp"
#include "qnl/entanglement.hpp"
#include "qnl/spectral2d.hpp"
#include "qnl/tdqmc.hpp"

namespace qnl {

/// Rectangular numeric table. NaN cells are written empty.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t size() const { return rows.size(); }
};

CsvTable to_table(const DipoleSeries& series);
/// t, x1_0..x1_{K-1}, x2_0..x2_{K-1}
CsvTable to_table(const TrajectorySet& set);
/// Columns S_<label>, aligned on the union of all time stamps.
CsvTable to_table(const std::vector<EntropySeries>& series);
CsvTable to_table(const SweepTable& table);
/// tau, E1, E2, stderr, stage
CsvTable to_table(const std::vector<EnergyRecord>& history);
/// Fitted curve sampled at `points` sigmas across [lo, hi].
CsvTable fit_curve(const FitResult& fit, double lo, double hi, int points);

/// Column label for a TDQMC entropy curve, e.g. "tdqmc_0.82".
std::string tdqmc_label(double sigma);

struct EmitOptions {
  bool force = false;
  bool plot_script = false;
  std::string title;
};

/// Writes `path` (and `path` with extension .gp when requested). Refuses to
/// replace existing files unless force is set. Returns the files written.
std::vector<std::filesystem::path> emit_plot_data(
    const CsvTable& table, const std::filesystem::path& path,
    const EmitOptions& options = {});

using Summary = std::vector<std::pair<std::string, std::string>>;

/// `key = value` lines.
std::filesystem::path write_summary(const Summary& summary,
                                    const std::filesystem::path& path,
                                    bool force);

/// Shortest text that parses back to the same double.
std::string format_number(double v);

}  // namespace qnl

#endif  // QNL_OUTPUT_HPP
