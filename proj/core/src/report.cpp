#include "spxnet/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "spxnet/errors.hpp"
#include "spxnet/keyvalue.hpp"
#include "spxnet/weights_io.hpp"

namespace spxnet {

namespace {

constexpr const char* kCsvHeader = "method,params,train_epe,val_epe,seconds,seed";

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::vector<std::string> split_csv_line(const std::string& line, std::size_t lineno) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw FormatError("line " + std::to_string(lineno) + ": unterminated quote");
  fields.push_back(std::move(cur));
  return fields;
}

template <typename T>
T parse_number(const std::string& field, const char* what, std::size_t lineno) {
  T v{};
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw FormatError("line " + std::to_string(lineno) + ": bad " + what + " '" + field + "'");
  }
  return v;
}

}  // namespace

void ResultRow::validate() const {
  if (method.empty() || method.find_first_of("\n\r") != std::string::npos) {
    throw ConfigError("result row method name must be a non-empty single line");
  }
  for (double e : {train_epe, val_epe}) {
    if (!std::isfinite(e) || e < 0.0) throw ConfigError("result row '" + method + "' has invalid EPE " + shortest(e));
  }
  if (params == 0 && !is_baseline()) throw ConfigError("result row '" + method + "' has zero parameters");
}

ReportFormat parse_report_format(const std::string& s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "md" || s == "markdown") return ReportFormat::markdown;
  throw ConfigError("unknown report format '" + s + "' (expected md or csv)");
}

std::string compare(std::vector<ResultRow> rows, ReportFormat format) {
  std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) { return a.method < b.method; });
  std::ostringstream os;
  if (format == ReportFormat::csv) {
    os << kCsvHeader << '\n';
    for (const auto& r : rows) {
      os << csv_field(r.method) << ',' << r.params << ',' << shortest(r.train_epe) << ',' << shortest(r.val_epe) << ','
         << shortest(r.seconds) << ',' << r.seed << '\n';
    }
    return os.str();
  }
  os << "| Method | Params (Mils) | Train EPE | Val EPE | Time (s) | Seed |\n";
  os << "|---|---:|---:|---:|---:|---:|\n";
  for (const auto& r : rows) {
    os << "| " << r.method << " | " << (r.params == 0 ? "-" : fixed(static_cast<double>(r.params) / 1e6, 3)) << " | "
       << fixed(r.train_epe, 3) << " | " << fixed(r.val_epe, 3) << " | " << fixed(r.seconds, 1) << " | " << r.seed
       << " |\n";
  }
  return os.str();
}

std::vector<ResultRow> parse_result_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  std::vector<ResultRow> rows;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (!header) {
      if (line != kCsvHeader) throw FormatError("result CSV must start with '" + std::string(kCsvHeader) + "'");
      header = true;
      continue;
    }
    const auto f = split_csv_line(line, lineno);
    if (f.size() != 6) throw FormatError("line " + std::to_string(lineno) + ": expected 6 fields, got " + std::to_string(f.size()));
    ResultRow r;
    r.method = f[0];
    r.params = parse_number<std::size_t>(f[1], "params", lineno);
    r.train_epe = parse_number<double>(f[2], "train_epe", lineno);
    r.val_epe = parse_number<double>(f[3], "val_epe", lineno);
    r.seconds = parse_number<double>(f[4], "seconds", lineno);
    r.seed = parse_number<std::uint64_t>(f[5], "seed", lineno);
    rows.push_back(std::move(r));
  }
  if (!header) throw FormatError("result CSV is empty");
  return rows;
}

std::vector<ResultRow> load_result_csv(const std::filesystem::path& path) { return parse_result_csv(read_file(path)); }

}  // namespace spxnet
