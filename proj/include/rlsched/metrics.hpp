#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rlsched/config.hpp"
#include "rlsched/errors.hpp"

namespace rlsched {

// One line per (variant, seed, episode); doubles are printed with %.17g so
// the log round-trips exactly.
struct MetricsRecord {
  std::string variant;
  std::uint64_t seed = 0;
  int episode = 0;
  double total_reward = 0.0;
  double total_sum_rate = 0.0;
  std::int64_t timeouts = 0;
  std::int64_t prio_timeouts = 0;
  std::int64_t prio_events = 0;
  double epsilon = 0.0;

  bool operator==(const MetricsRecord&) const = default;
};

inline constexpr const char* kMetricsHeader =
    "variant\tseed\tepisode\treward\tsum_rate\ttimeouts\tprio_timeouts\tprio_events\tepsilon";

inline std::string format_record(const MetricsRecord& r) {
  std::string out = r.variant;
  out += '\t';
  out += std::to_string(r.seed);
  out += '\t';
  out += std::to_string(r.episode);
  out += '\t';
  out += detail::format_double(r.total_reward);
  out += '\t';
  out += detail::format_double(r.total_sum_rate);
  out += '\t';
  out += std::to_string(r.timeouts);
  out += '\t';
  out += std::to_string(r.prio_timeouts);
  out += '\t';
  out += std::to_string(r.prio_events);
  out += '\t';
  out += detail::format_double(r.epsilon);
  return out;
}

inline MetricsRecord parse_record(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (start <= line.size()) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos
                                                                 : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  if (fields.size() != 9) throw ConfigError("metrics line has " +
                                            std::to_string(fields.size()) + " fields");
  MetricsRecord r;
  r.variant = fields[0];
  r.seed = std::stoull(fields[1]);
  r.episode = std::stoi(fields[2]);
  r.total_reward = std::strtod(fields[3].c_str(), nullptr);
  r.total_sum_rate = std::strtod(fields[4].c_str(), nullptr);
  r.timeouts = std::stoll(fields[5]);
  r.prio_timeouts = std::stoll(fields[6]);
  r.prio_events = std::stoll(fields[7]);
  r.epsilon = std::strtod(fields[8].c_str(), nullptr);
  return r;
}

// Append-only writer; the header goes out on creation and every record is
// flushed so the file is readable mid-run.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::filesystem::path& path) : out_(path, std::ios::trunc) {
    if (!out_) throw ConfigError("cannot open metrics file " + path.string());
    out_ << kMetricsHeader << '\n';
    out_.flush();
  }

  void append(const MetricsRecord& r) {
    out_ << format_record(r) << '\n';
    out_.flush();
    if (!out_) throw ConfigError("metrics write failed");
  }

 private:
  std::ofstream out_;
};

inline void write_metrics(const std::filesystem::path& path,
                          const std::vector<MetricsRecord>& records) {
  MetricsWriter writer(path);
  for (const MetricsRecord& r : records) writer.append(r);
}

inline std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open metrics file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader)
    throw ConfigError("metrics file " + path.string() + " has no valid header");
  std::vector<MetricsRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(parse_record(line));
  }
  return records;
}

// Per-variant evaluation scores normalized to the baseline variant's mean.
struct EvalReportRow {
  std::string variant;
  int num_seeds = 0;
  double mean_reward_per_step = 0.0;   // raw
  double mean_prio_timeout_rate = 0.0; // raw
  double reward_norm_mean = 0.0;
  double reward_norm_var = 0.0;
  double prio_norm_mean = 0.0;
  double prio_norm_var = 0.0;
};

struct EvalReport {
  std::vector<EvalReportRow> rows;
};

namespace detail {

inline std::string summary_table(const EvalReport& report, bool prio) {
  std::ostringstream out;
  out << "variant\tnorm_mean\tnorm_var\n";
  for (const EvalReportRow& row : report.rows) {
    out << row.variant << '\t'
        << format_double(prio ? row.prio_norm_mean : row.reward_norm_mean) << '\t'
        << format_double(prio ? row.prio_norm_var : row.reward_norm_var) << '\n';
  }
  return out.str();
}

}  // namespace detail

// Writes the two plot-ready tables plus a readable rendering; returns the
// directory passed in.
inline std::filesystem::path emit_summary(const EvalReport& report,
                                          const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "summary_reward.tsv", std::ios::trunc);
    out << detail::summary_table(report, false);
  }
  {
    std::ofstream out(dir / "summary_prio.tsv", std::ios::trunc);
    out << detail::summary_table(report, true);
  }
  std::ofstream out(dir / "summary.txt", std::ios::trunc);
  out << "variant            reward/baseline  (var)        prio_rate/baseline  (var)\n";
  char buf[160];
  for (const EvalReportRow& row : report.rows) {
    std::snprintf(buf, sizeof(buf), "%-18s %10.4f  %10.3e   %10.4f  %10.3e\n",
                  row.variant.c_str(), row.reward_norm_mean, row.reward_norm_var,
                  row.prio_norm_mean, row.prio_norm_var);
    out << buf;
  }
  return dir;
}

}  // namespace rlsched
