#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "clonesim/engine.hpp"
#include "clonesim/errors.hpp"

namespace clonesim {

struct SummaryMetrics {
  double weighted_avg_flowtime_s = 0.0;
  double unweighted_avg_flowtime_s = 0.0;
  std::int64_t job_count = 0;
  std::int64_t total_clone_copies = 0;
  double wall_seconds = 0.0;  // runtime metadata; never part of the metric files
};

/// Weighted average sum w_i (f_i - a_i) / sum w_i and the plain average.
/// A truncated result is rejected unless `allow_partial`, which aggregates
/// over completed jobs only.
inline SummaryMetrics summarize(const SimulationResult& result, bool allow_partial = false) {
  if (result.truncated && !allow_partial)
    throw ContractError("summarize: result is truncated; pass allow_partial to aggregate completed jobs");
  SummaryMetrics m;
  double wsum = 0.0;
  double wflow = 0.0;
  double flow = 0.0;
  for (const auto& j : result.jobs) {
    if (!j.completed()) {
      if (!allow_partial) throw ContractError("summarize: job " + j.name + " did not complete");
      continue;
    }
    wsum += j.weight;
    wflow += j.weight * j.flowtime();
    flow += j.flowtime();
    ++m.job_count;
  }
  if (m.job_count == 0) throw ContractError("summarize: no completed jobs");
  m.weighted_avg_flowtime_s = wflow / wsum;
  m.unweighted_avg_flowtime_s = flow / static_cast<double>(m.job_count);
  m.total_clone_copies = result.clone_copies;
  return m;
}

// Mean of per-replication metrics.
inline SummaryMetrics average(const std::vector<SummaryMetrics>& reps) {
  if (reps.empty()) throw ContractError("average: no replications");
  SummaryMetrics m;
  double clones = 0.0;
  double jobs = 0.0;
  for (const auto& r : reps) {
    m.weighted_avg_flowtime_s += r.weighted_avg_flowtime_s;
    m.unweighted_avg_flowtime_s += r.unweighted_avg_flowtime_s;
    clones += static_cast<double>(r.total_clone_copies);
    jobs += static_cast<double>(r.job_count);
    m.wall_seconds += r.wall_seconds;
  }
  const auto n = static_cast<double>(reps.size());
  m.weighted_avg_flowtime_s /= n;
  m.unweighted_avg_flowtime_s /= n;
  m.job_count = std::llround(jobs / n);
  m.total_clone_copies = std::llround(clones / n);
  return m;
}

struct CdfPoint {
  double flowtime_s;
  double fraction;
};

// Fraction of all jobs finished within each grid flowtime.
struct CdfSeries {
  std::vector<CdfPoint> points;
};

inline CdfSeries cdf(const std::vector<double>& flowtimes, double lo, double hi, double step) {
  if (!(lo < hi) || !(step > 0.0)) throw ContractError("cdf: need lo < hi and step > 0");
  if (flowtimes.empty()) throw ContractError("cdf: no flowtimes");
  std::vector<double> sorted = flowtimes;
  std::sort(sorted.begin(), sorted.end());
  CdfSeries out;
  const auto n = static_cast<double>(sorted.size());
  const auto steps = static_cast<long long>(std::floor((hi - lo) / step + 1e-9));
  for (long long k = 0; k <= steps; ++k) {
    const double t = lo + static_cast<double>(k) * step;
    const auto below = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
    out.points.push_back({t, static_cast<double>(below) / n});
  }
  return out;
}

// CDF over every job of the result; unfinished jobs count as never finishing.
inline CdfSeries cdf(const SimulationResult& result, double lo, double hi, double step) {
  std::vector<double> flows;
  flows.reserve(result.jobs.size());
  for (const auto& j : result.jobs)
    flows.push_back(j.completed() ? j.flowtime() : std::numeric_limits<double>::infinity());
  return cdf(flows, lo, hi, step);
}

// Export ---------------------------------------------------------------------

enum class ExportFormat { csv, json };

// 6 significant digits, shortest form.
inline std::string format_sig6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline double round_sig6(double v) { return std::stod(format_sig6(v)); }

inline constexpr const char* kSummaryCsvHeader = "weighted_avg_s,unweighted_avg_s,jobs,clones";
inline constexpr const char* kCdfCsvHeader = "flowtime_s,fraction";

inline std::string summary_csv_row(const SummaryMetrics& m) {
  return format_sig6(m.weighted_avg_flowtime_s) + ',' + format_sig6(m.unweighted_avg_flowtime_s) + ',' +
         std::to_string(m.job_count) + ',' + std::to_string(m.total_clone_copies);
}

inline std::string to_csv(const SummaryMetrics& m) {
  return std::string(kSummaryCsvHeader) + '\n' + summary_csv_row(m) + '\n';
}

inline std::string to_csv(const CdfSeries& c) {
  std::string s = std::string(kCdfCsvHeader) + '\n';
  for (const auto& p : c.points) s += format_sig6(p.flowtime_s) + ',' + format_sig6(p.fraction) + '\n';
  return s;
}

inline nlohmann::ordered_json to_json(const SummaryMetrics& m) {
  nlohmann::ordered_json j;
  j["weighted_avg_s"] = round_sig6(m.weighted_avg_flowtime_s);
  j["unweighted_avg_s"] = round_sig6(m.unweighted_avg_flowtime_s);
  j["jobs"] = m.job_count;
  j["clones"] = m.total_clone_copies;
  return j;
}

inline nlohmann::ordered_json to_json(const CdfSeries& c) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& p : c.points)
    arr.push_back({{"flowtime_s", round_sig6(p.flowtime_s)}, {"fraction", round_sig6(p.fraction)}});
  return arr;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path, "cannot open for writing");
  out << text;
  if (!out) throw IoError(path, "write failed");
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename T>
void export_to(const T& value, ExportFormat format, const std::string& path) {
  write_text(path, format == ExportFormat::csv ? to_csv(value) : to_json(value).dump(2) + '\n');
}

inline SummaryMetrics summary_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string header;
  std::string row;
  std::getline(in, header);
  if (header != kSummaryCsvHeader) throw ParseError(1, "unexpected summary header");
  if (!std::getline(in, row)) throw ParseError(2, "missing summary row");
  SummaryMetrics m;
  char comma = 0;
  std::istringstream r(row);
  long long jobs = 0;
  long long clones = 0;
  if (!(r >> m.weighted_avg_flowtime_s >> comma >> m.unweighted_avg_flowtime_s >> comma >> jobs >> comma >> clones))
    throw ParseError(2, "malformed summary row");
  m.job_count = jobs;
  m.total_clone_copies = clones;
  return m;
}

inline CdfSeries cdf_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (line != kCdfCsvHeader) throw ParseError(1, "unexpected cdf header");
  CdfSeries c;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::istringstream r(line);
    CdfPoint p{};
    char comma = 0;
    if (!(r >> p.flowtime_s >> comma >> p.fraction)) throw ParseError(n, "malformed cdf row");
    c.points.push_back(p);
  }
  return c;
}

}  // namespace clonesim
