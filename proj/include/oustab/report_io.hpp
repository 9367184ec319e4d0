#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace oustab {

// One (stabilizer, checkpoint) cell of an experiment report.  `stderr_` is
// NaN when trials < 2 (undefined).  Oracle columns are absent when no closed
// form applies; `bound_applicability` spells out which ones do.
struct ReportRow {
  std::string stabilizer;
  double checkpoint_t = 0.0;
  double mse = 0.0;
  double stderr_ = 0.0;
  long trials = 0;
  std::optional<double> oracle_exact;
  std::optional<double> oracle_upper;
  std::optional<double> oracle_lower;
  std::string bound_applicability = "none";
};

struct MseReport {
  std::vector<ReportRow> rows;  // sorted by (stabilizer, checkpoint_t)
  std::string config_hash;
  std::uint64_t base_seed = 0;
  double wall_time_seconds = 0.0;
};

// CSV layout: metadata as leading '#' comment lines, then a header row and
// one line per report row.  All numeric fields use 17 significant digits, so
// a re-parse reproduces every double exactly.
void write_report_csv(const MseReport& report, std::ostream& out);
void write_report_csv(const MseReport& report, const std::filesystem::path& path);
MseReport read_report_csv(const std::filesystem::path& path);

void write_report_json(const MseReport& report, std::ostream& out);
void write_report_json(const MseReport& report, const std::filesystem::path& path);
MseReport read_report_json(const std::filesystem::path& path);

// Standalone SVG: one polyline per stabilizer over the checkpoint grid with
// a log-scaled error axis.  Plots are a convenience; CSV is the contract.
void emit_plot(const MseReport& report, const std::filesystem::path& path);

// 17-significant-digit representation that round-trips doubles exactly.
std::string format_double(double value);

// Containment of empirical risk against the attached oracle values at
// 3-standard-error slack; exact oracles are checked from both sides.  Rows
// without a finite stderr are skipped.
struct ContainmentViolation {
  std::string stabilizer;
  double checkpoint_t;
  std::string what;  // which bound failed and by how much
};
std::vector<ContainmentViolation> check_containment(const MseReport& report);

}  // namespace oustab
