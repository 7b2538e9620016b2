// CSV reports and the ratio statistics reported over a dataset.
//
// Every report starts with the schema line `# relu-regions-attack v1`, then a
// `# command=...` provenance line, a column header, one row per point (or per
// point and round), and `# summary ...` lines with the aggregates. Reals are
// written in the shortest form that reads back exactly, so aggregates can be
// recomputed from the rows. The last column, wall_time_ms, is the only
// non-deterministic one.

#ifndef RELU_REGIONS_REPORT_HPP
#define RELU_REGIONS_REPORT_HPP

#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace relu_regions {

inline constexpr const char* kReportSchema = "# relu-regions-attack v1";

/// Ratio numerator/denominator over the points where both exist.
/// Points with a denominator but no numerator count as numerator failures
/// and are left out of the ratio aggregates.
struct RatioStats {
  std::size_t compared = 0;
  std::size_t failures = 0;
  /// Points where the denominator is strictly smaller than the numerator.
  std::size_t improved = 0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;

  /// Percentage of compared points that improved.
  double improvement_rate() const;
};

RatioStats ratio_stats(const std::vector<std::optional<double>>& numerators,
                       const std::vector<std::optional<double>>& denominators);

/// Shortest text that reads back to the same double; empty for nullopt.
std::string format_real(double v);
std::string format_real(const std::optional<double>& v);

/// Commas and newlines replaced so the cell stays one CSV field.
std::string sanitize_cell(const std::string& text);

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  void comment(const std::string& text);
  void row(const std::vector<std::string>& cells);

 private:
  std::ostream& out_;
};

/// "# summary key=value ..." with the stats fields.
std::string summary_line(const std::string& label, const RatioStats& stats);

}  // namespace relu_regions

#endif  // RELU_REGIONS_REPORT_HPP
