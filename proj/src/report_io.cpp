#include "oustab/report_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "oustab/errors.hpp"

namespace oustab {

namespace {

using nlohmann::json;

double parse_double_field(const std::string& field, const std::string& context) {
  if (field.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(field, &used);
  } catch (const std::exception&) {
    throw FormatError("report CSV: bad number '" + field + "' in " + context);
  }
  if (used != field.size()) {
    throw FormatError("report CSV: trailing junk in number '" + field + "' in " + context);
  }
  return value;
}

std::optional<double> parse_optional_field(const std::string& field, const std::string& context) {
  if (field.empty()) return std::nullopt;
  return parse_double_field(field, context);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string optional_cell(const std::optional<double>& v) {
  return v.has_value() ? format_double(*v) : std::string();
}

constexpr const char* kCsvHeader =
    "stabilizer,checkpoint_t,mse,stderr,trials,oracle_exact,oracle_upper,oracle_lower,"
    "bound_applicability";

}  // namespace

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

void write_report_csv(const MseReport& report, std::ostream& out) {
  out << "# oustab-report 1\n";
  out << "# config_hash " << report.config_hash << "\n";
  out << "# base_seed " << report.base_seed << "\n";
  out << "# wall_time_seconds " << format_double(report.wall_time_seconds) << "\n";
  out << kCsvHeader << "\n";
  for (const ReportRow& row : report.rows) {
    out << row.stabilizer << ',' << format_double(row.checkpoint_t) << ','
        << format_double(row.mse) << ','
        << (std::isnan(row.stderr_) ? std::string() : format_double(row.stderr_)) << ','
        << row.trials << ',' << optional_cell(row.oracle_exact) << ','
        << optional_cell(row.oracle_upper) << ',' << optional_cell(row.oracle_lower) << ','
        << row.bound_applicability << "\n";
  }
  out.flush();
}

void write_report_csv(const MseReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open report for writing: " + path.string());
  write_report_csv(report, static_cast<std::ostream&>(out));
  if (!out) throw IoError("failed writing report: " + path.string());
}

MseReport read_report_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open report: " + path.string());
  MseReport report;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream meta(line.substr(1));
      std::string key;
      meta >> key;
      if (key == "config_hash") meta >> report.config_hash;
      else if (key == "base_seed") meta >> report.base_seed;
      else if (key == "wall_time_seconds") {
        std::string v;
        meta >> v;
        report.wall_time_seconds = parse_double_field(v, "wall_time_seconds");
      }
      continue;
    }
    if (!header_seen) {
      if (line != kCsvHeader) {
        throw FormatError("report CSV " + path.string() + ": unexpected header '" + line + "'");
      }
      header_seen = true;
      continue;
    }
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != 9) {
      throw FormatError("report CSV " + path.string() + ": expected 9 cells, got " +
                        std::to_string(cells.size()));
    }
    ReportRow row;
    row.stabilizer = cells[0];
    row.checkpoint_t = parse_double_field(cells[1], "checkpoint_t");
    row.mse = parse_double_field(cells[2], "mse");
    row.stderr_ = cells[3].empty() ? std::numeric_limits<double>::quiet_NaN()
                                   : parse_double_field(cells[3], "stderr");
    row.trials = std::stol(cells[4]);
    row.oracle_exact = parse_optional_field(cells[5], "oracle_exact");
    row.oracle_upper = parse_optional_field(cells[6], "oracle_upper");
    row.oracle_lower = parse_optional_field(cells[7], "oracle_lower");
    row.bound_applicability = cells[8];
    report.rows.push_back(std::move(row));
  }
  if (!header_seen) throw FormatError("report CSV " + path.string() + ": missing header");
  return report;
}

namespace {

json row_to_json(const ReportRow& row) {
  json j;
  j["stabilizer"] = row.stabilizer;
  j["checkpoint_t"] = row.checkpoint_t;
  j["mse"] = row.mse;
  if (std::isnan(row.stderr_)) j["stderr"] = nullptr;
  else j["stderr"] = row.stderr_;
  j["trials"] = row.trials;
  j["oracle_exact"] = row.oracle_exact.has_value() ? json(*row.oracle_exact) : json(nullptr);
  j["oracle_upper"] = row.oracle_upper.has_value() ? json(*row.oracle_upper) : json(nullptr);
  j["oracle_lower"] = row.oracle_lower.has_value() ? json(*row.oracle_lower) : json(nullptr);
  j["bound_applicability"] = row.bound_applicability;
  return j;
}

std::optional<double> json_optional(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

void write_report_json(const MseReport& report, std::ostream& out) {
  json j;
  j["format"] = "oustab-report";
  j["version"] = 1;
  j["metadata"] = {{"config_hash", report.config_hash},
                   {"base_seed", report.base_seed},
                   {"wall_time_seconds", report.wall_time_seconds}};
  json rows = json::array();
  for (const ReportRow& row : report.rows) rows.push_back(row_to_json(row));
  j["rows"] = std::move(rows);
  out << j.dump(2) << "\n";
}

void write_report_json(const MseReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open report for writing: " + path.string());
  write_report_json(report, static_cast<std::ostream&>(out));
  if (!out) throw IoError("failed writing report: " + path.string());
}

MseReport read_report_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open report: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("report JSON " + path.string() + ": " + e.what());
  }
  MseReport report;
  const json& meta = j.at("metadata");
  report.config_hash = meta.at("config_hash").get<std::string>();
  report.base_seed = meta.at("base_seed").get<std::uint64_t>();
  report.wall_time_seconds = meta.at("wall_time_seconds").get<double>();
  for (const json& rj : j.at("rows")) {
    ReportRow row;
    row.stabilizer = rj.at("stabilizer").get<std::string>();
    row.checkpoint_t = rj.at("checkpoint_t").get<double>();
    row.mse = rj.at("mse").get<double>();
    row.stderr_ = rj.at("stderr").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                            : rj.at("stderr").get<double>();
    row.trials = rj.at("trials").get<long>();
    row.oracle_exact = json_optional(rj, "oracle_exact");
    row.oracle_upper = json_optional(rj, "oracle_upper");
    row.oracle_lower = json_optional(rj, "oracle_lower");
    row.bound_applicability = rj.at("bound_applicability").get<std::string>();
    report.rows.push_back(std::move(row));
  }
  return report;
}

namespace {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;  // (t, mse)
};

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

}  // namespace

void emit_plot(const MseReport& report, const std::filesystem::path& path) {
  std::vector<Series> series;
  double t_min = std::numeric_limits<double>::infinity();
  double t_max = -std::numeric_limits<double>::infinity();
  double y_min = std::numeric_limits<double>::infinity();
  double y_max = -std::numeric_limits<double>::infinity();
  for (const ReportRow& row : report.rows) {
    if (!(row.mse > 0.0)) continue;  // log axis
    auto it = std::find_if(series.begin(), series.end(),
                           [&](const Series& s) { return s.name == row.stabilizer; });
    if (it == series.end()) {
      series.push_back({row.stabilizer, {}});
      it = std::prev(series.end());
    }
    it->points.emplace_back(row.checkpoint_t, row.mse);
    t_min = std::min(t_min, row.checkpoint_t);
    t_max = std::max(t_max, row.checkpoint_t);
    y_min = std::min(y_min, row.mse);
    y_max = std::max(y_max, row.mse);
  }

  const double width = 720, height = 480;
  const double left = 70, right = 20, top = 20, bottom = 50;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  if (!series.empty() && t_max > t_min && y_max > 0.0) {
    const double ly_min = std::floor(std::log10(y_min));
    const double ly_max = std::ceil(std::log10(y_max));
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;
    auto x_of = [&](double t) { return left + (t - t_min) / (t_max - t_min) * plot_w; };
    auto y_of = [&](double v) {
      return top + (ly_max - std::log10(v)) / (ly_max - ly_min) * plot_h;
    };

    // axes
    svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
        << (height - bottom) << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << left << "\" y1=\"" << (height - bottom) << "\" x2=\""
        << (width - right) << "\" y2=\"" << (height - bottom) << "\" stroke=\"black\"/>\n";

    for (double e = ly_min; e <= ly_max + 0.5; e += 1.0) {
      const double v = std::pow(10.0, e);
      const double y = y_of(v);
      svg << "<line x1=\"" << (left - 4) << "\" y1=\"" << y << "\" x2=\"" << left << "\" y2=\""
          << y << "\" stroke=\"black\"/>\n";
      svg << "<text x=\"" << (left - 8) << "\" y=\"" << (y + 4)
          << "\" font-size=\"11\" text-anchor=\"end\">1e" << static_cast<int>(e) << "</text>\n";
    }
    const int x_ticks = 5;
    for (int i = 0; i <= x_ticks; ++i) {
      const double t = t_min + (t_max - t_min) * i / x_ticks;
      const double x = x_of(t);
      svg << "<line x1=\"" << x << "\" y1=\"" << (height - bottom) << "\" x2=\"" << x
          << "\" y2=\"" << (height - bottom + 4) << "\" stroke=\"black\"/>\n";
      std::ostringstream label;
      label.precision(4);
      label << t;
      svg << "<text x=\"" << x << "\" y=\"" << (height - bottom + 18)
          << "\" font-size=\"11\" text-anchor=\"middle\">" << label.str() << "</text>\n";
    }
    svg << "<text x=\"" << (left + plot_w / 2) << "\" y=\"" << (height - 10)
        << "\" font-size=\"12\" text-anchor=\"middle\">checkpoint T</text>\n";
    svg << "<text x=\"16\" y=\"" << (top + plot_h / 2)
        << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << (top + plot_h / 2) << ")\">mean squared error</text>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
      auto pts = series[s].points;
      std::sort(pts.begin(), pts.end());
      svg << "<polyline fill=\"none\" stroke=\"" << kPalette[s % 8]
          << "\" stroke-width=\"1.5\" points=\"";
      for (const auto& [t, v] : pts) svg << x_of(t) << "," << y_of(v) << " ";
      svg << "\"/>\n";
      svg << "<text x=\"" << (width - right - 10) << "\" y=\"" << (top + 16 + 16 * s)
          << "\" font-size=\"12\" text-anchor=\"end\" fill=\"" << kPalette[s % 8] << "\">"
          << series[s].name << "</text>\n";
    }
  } else {
    svg << "<text x=\"" << (width / 2) << "\" y=\"" << (height / 2)
        << "\" font-size=\"14\" text-anchor=\"middle\">no plottable rows</text>\n";
  }
  svg << "</svg>\n";

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open plot for writing: " + path.string());
  out << svg.str();
  if (!out) throw IoError("failed writing plot: " + path.string());
}

std::vector<ContainmentViolation> check_containment(const MseReport& report) {
  std::vector<ContainmentViolation> violations;
  for (const ReportRow& row : report.rows) {
    if (!std::isfinite(row.stderr_)) continue;
    const double slack = 3.0 * row.stderr_;
    auto record = [&](const std::string& what) {
      violations.push_back({row.stabilizer, row.checkpoint_t, what});
    };
    if (row.oracle_exact && std::abs(row.mse - *row.oracle_exact) > slack) {
      record("mse " + format_double(row.mse) + " deviates from exact " +
             format_double(*row.oracle_exact) + " by more than 3 SE (" + format_double(slack) +
             ")");
    }
    if (row.oracle_upper && row.mse - slack > *row.oracle_upper) {
      record("mse " + format_double(row.mse) + " exceeds upper bound " +
             format_double(*row.oracle_upper) + " beyond 3 SE");
    }
    if (row.oracle_lower && row.mse + slack < *row.oracle_lower) {
      record("mse " + format_double(row.mse) + " falls below lower bound " +
             format_double(*row.oracle_lower) + " beyond 3 SE");
    }
  }
  return violations;
}

}  // namespace oustab
