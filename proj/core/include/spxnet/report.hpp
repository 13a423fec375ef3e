#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace spxnet {

inline constexpr const char* kZeroPredictor = "zero-predictor";
inline constexpr const char* kMeanPredictor = "mean-predictor";

struct ResultRow {
  std::string method;
  std::size_t params = 0;  // 0 only for the trivial-predictor baselines
  double train_epe = 0.0;
  double val_epe = 0.0;
  double seconds = 0.0;    // training wall clock
  std::uint64_t seed = 0;

  bool is_baseline() const { return method == kZeroPredictor || method == kMeanPredictor; }
  // Throws ConfigError on a negative or non-finite EPE, or params == 0 for a network.
  void validate() const;

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

enum class ReportFormat { csv, markdown };
ReportFormat parse_report_format(const std::string& s);

// Rows sorted by method name (stable for equal names). CSV carries full
// precision so it parses back to identical rows; markdown is the readable
// table with params in millions.
std::string compare(std::vector<ResultRow> rows, ReportFormat format);

std::vector<ResultRow> parse_result_csv(const std::string& text);
std::vector<ResultRow> load_result_csv(const std::filesystem::path& path);

}  // namespace spxnet
