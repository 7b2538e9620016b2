#include "relu_regions/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace relu_regions {

double RatioStats::improvement_rate() const {
  if (compared == 0) return std::numeric_limits<double>::quiet_NaN();
  return 100.0 * static_cast<double>(improved) / static_cast<double>(compared);
}

RatioStats ratio_stats(const std::vector<std::optional<double>>& numerators,
                       const std::vector<std::optional<double>>& denominators) {
  if (numerators.size() != denominators.size()) {
    throw std::invalid_argument("ratio_stats: column lengths differ");
  }
  RatioStats s;
  double sum = 0.0;
  s.min = std::numeric_limits<double>::infinity();
  s.max = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < numerators.size(); ++i) {
    if (!denominators[i]) continue;
    if (!numerators[i]) {
      ++s.failures;
      continue;
    }
    const double r = *numerators[i] / *denominators[i];
    ++s.compared;
    sum += r;
    s.min = std::min(s.min, r);
    s.max = std::max(s.max, r);
    if (*denominators[i] < *numerators[i]) ++s.improved;
  }
  if (s.compared == 0) {
    s.mean = s.min = s.max = std::numeric_limits<double>::quiet_NaN();
  } else {
    s.mean = sum / static_cast<double>(s.compared);
  }
  return s;
}

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_real(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }

std::string sanitize_cell(const std::string& text) {
  std::string out = text;
  std::replace(out.begin(), out.end(), ',', ';');
  std::replace(out.begin(), out.end(), '\n', ' ');
  std::replace(out.begin(), out.end(), '\r', ' ');
  return out;
}

void CsvWriter::comment(const std::string& text) { out_ << "# " << text << '\n'; }

void CsvWriter::row(const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) out_ << ',';
    out_ << cells[i];
  }
  out_ << '\n';
}

std::string summary_line(const std::string& label, const RatioStats& stats) {
  return "summary " + label + " compared=" + std::to_string(stats.compared) +
         " failures=" + std::to_string(stats.failures) + " mean=" + format_real(stats.mean) +
         " min=" + format_real(stats.min) + " max=" + format_real(stats.max) +
         " ir=" + format_real(stats.improvement_rate());
}

}  // namespace relu_regions
