#pragma once

#include <string>
#include <vector>

namespace focus::cli {

struct BarSeries {
  std::string name;
  std::vector<double> values;
  std::vector<double> errors;  // optional, same length as values
};

// Grouped bar chart as a standalone SVG document. Values are drawn on a
// fixed [0, 1] axis.
std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& groups,
                          const std::vector<BarSeries>& series);

}  // namespace focus::cli
