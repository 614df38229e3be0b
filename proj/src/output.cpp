#include "qnl/output.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

namespace qnl {
namespace {

void refuse_existing(const std::filesystem::path& path, bool force) {
  if (!force && std::filesystem::exists(path))
    throw IoError(path.string() + " already exists (use --force to overwrite)");
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec)
      throw IoError("cannot create directory " + path.parent_path().string() +
                    ": " + ec.message());
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string tdqmc_label(double sigma) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "tdqmc_%.2f", sigma);
  return buf;
}

CsvTable to_table(const DipoleSeries& s) {
  CsvTable t{{"t", "d1", "d2"}, {}};
  for (std::size_t i = 0; i < s.size(); ++i)
    t.rows.push_back({s.times[i], s.d1[i], s.d2[i]});
  return t;
}

CsvTable to_table(const TrajectorySet& s) {
  CsvTable t{{"t"}, {}};
  const Eigen::Index k = s.count();
  for (Eigen::Index j = 0; j < k; ++j) t.header.push_back("x1_" + std::to_string(j));
  for (Eigen::Index j = 0; j < k; ++j) t.header.push_back("x2_" + std::to_string(j));
  for (std::size_t i = 0; i < s.times.size(); ++i) {
    std::vector<double> row{s.times[i]};
    for (Eigen::Index j = 0; j < k; ++j) row.push_back(s.x1(Eigen::Index(i), j));
    for (Eigen::Index j = 0; j < k; ++j) row.push_back(s.x2(Eigen::Index(i), j));
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable to_table(const std::vector<EntropySeries>& series) {
  // Time stamps from different solvers are matched at 1e-9 resolution.
  auto key = [](double t) { return std::llround(t * 1e9); };
  std::map<long long, std::vector<double>> merged;
  const auto n = series.size();
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t i = 0; i < series[c].size(); ++i) {
      auto [it, inserted] = merged.try_emplace(
          key(series[c].times[i]),
          std::vector<double>(n + 1, std::nan("")));
      it->second[0] = series[c].times[i];
      it->second[c + 1] = series[c].values[i];
    }
  CsvTable t{{"t"}, {}};
  for (const auto& s : series) t.header.push_back("S_" + s.label);
  for (auto& [k, row] : merged) t.rows.push_back(std::move(row));
  return t;
}

CsvTable to_table(const SweepTable& table) {
  CsvTable t{{"sigma", "E", "stderr", "E1", "seed", "M", "converged"}, {}};
  for (const auto& r : table.rows)
    t.rows.push_back({r.sigma, r.energy, r.error, r.mixed, double(r.seed),
                      double(r.walkers), r.converged ? 1.0 : 0.0});
  return t;
}

CsvTable to_table(const std::vector<EnergyRecord>& history) {
  CsvTable t{{"tau", "E1", "E2", "stderr", "stage"}, {}};
  for (const auto& r : history)
    t.rows.push_back({r.tau, r.e1, r.e2, r.e2_stderr, double(r.stage)});
  return t;
}

CsvTable fit_curve(const FitResult& fit, double lo, double hi, int points) {
  CsvTable t{{"sigma", "E_fit"}, {}};
  for (int i = 0; i < points; ++i) {
    const double s = points > 1 ? lo + (hi - lo) * i / (points - 1) : lo;
    t.rows.push_back({s, fit(s)});
  }
  return t;
}

std::vector<std::filesystem::path> emit_plot_data(
    const CsvTable& table, const std::filesystem::path& path,
    const EmitOptions& options) {
  if (table.rows.empty())
    throw ValidationError("refusing to write an empty series to " + path.string());
  std::filesystem::path script = path;
  script.replace_extension(".gp");
  refuse_existing(path, options.force);
  if (options.plot_script) refuse_existing(script, options.force);

  {
    std::ofstream out = open_for_write(path);
    for (std::size_t c = 0; c < table.header.size(); ++c)
      out << (c ? "," : "") << table.header[c];
    out << '\n';
    for (const auto& row : table.rows) {
      for (std::size_t c = 0; c < row.size(); ++c)
        out << (c ? "," : "") << format_number(row[c]);
      out << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
  }
  std::vector<std::filesystem::path> written{path};
  if (!options.plot_script) return written;

  std::ofstream gp = open_for_write(script);
  gp << "set datafile separator ','\n"
     << "set key autotitle columnhead\n"
     << "set xlabel '" << table.header.front() << "'\n";
  if (!options.title.empty()) gp << "set title '" << options.title << "'\n";
  gp << "plot for [i=2:" << table.header.size() << "] '"
     << path.filename().string() << "' using 1:i with lines\n";
  if (!gp) throw IoError("failed writing " + script.string());
  written.push_back(script);
  return written;
}

std::filesystem::path write_summary(const Summary& summary,
                                    const std::filesystem::path& path,
                                    bool force) {
  refuse_existing(path, force);
  std::ofstream out = open_for_write(path);
  for (const auto& [k, v] : summary) out << k << " = " << v << '\n';
  if (!out) throw IoError("failed writing " + path.string());
  return path;
}

}  // namespace qnl
