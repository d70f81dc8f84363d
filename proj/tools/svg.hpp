#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace ada::tools {

struct Series {
  std::string name;
  std::vector<std::optional<double>> values;  // one per category or x value
};

/// Grouped bars: one group per category, one bar per series. Missing values are skipped.
std::string bar_chart(const std::string& title, const std::vector<std::string>& categories,
                      const std::vector<Series>& series, const std::string& y_label);

/// Polyline per series over shared x values.
std::string line_chart(const std::string& title, const std::vector<double>& xs,
                       const std::vector<Series>& series, const std::string& x_label,
                       const std::string& y_label);

struct PointSet {
  std::string name;
  std::vector<std::array<double, 2>> points;
};

std::string scatter_plot(const std::string& title, const std::vector<PointSet>& sets);

}  // namespace ada::tools
