#include "plot.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace focus::cli {

namespace {

constexpr const char* kPalette[] = {"#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2",
                                    "#edc948"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& groups,
                          const std::vector<BarSeries>& series) {
  const double left = 50, top = 40, plot_h = 260, group_w = std::max(60.0, 30.0 * series.size());
  const double plot_w = group_w * static_cast<double>(std::max<std::size_t>(groups.size(), 1));
  const double width = left + plot_w + 150, height = top + plot_h + 60;
  const double bar_w = (group_w - 12) / static_cast<double>(std::max<std::size_t>(series.size(), 1));
  auto y_of = [&](double v) { return top + plot_h * (1.0 - std::clamp(v, 0.0, 1.0)); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\""
      << num(height) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << num(left) << "\" y=\"20\" font-size=\"14\">" << escape(title)
      << "</text>\n";
  for (int t = 0; t <= 5; ++t) {
    const double v = t / 5.0;
    svg << "<line x1=\"" << num(left) << "\" x2=\"" << num(left + plot_w) << "\" y1=\""
        << num(y_of(v)) << "\" y2=\"" << num(y_of(v)) << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << num(left - 6) << "\" y=\"" << num(y_of(v) + 4)
        << "\" text-anchor=\"end\">" << num(v) << "</text>\n";
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double gx = left + group_w * static_cast<double>(g) + 6;
    for (std::size_t s = 0; s < series.size(); ++s) {
      if (g >= series[s].values.size()) continue;
      const double v = series[s].values[g];
      const double x = gx + bar_w * static_cast<double>(s);
      svg << "<rect x=\"" << num(x) << "\" y=\"" << num(y_of(v)) << "\" width=\""
          << num(bar_w - 1) << "\" height=\"" << num(top + plot_h - y_of(v)) << "\" fill=\""
          << kPalette[s % std::size(kPalette)] << "\"/>\n";
      if (g < series[s].errors.size()) {
        const double e = series[s].errors[g];
        const double cx = x + (bar_w - 1) / 2;
        svg << "<line x1=\"" << num(cx) << "\" x2=\"" << num(cx) << "\" y1=\""
            << num(y_of(v - e)) << "\" y2=\"" << num(y_of(v + e))
            << "\" stroke=\"black\"/>\n";
      }
    }
    svg << "<text x=\"" << num(gx + (group_w - 12) / 2) << "\" y=\"" << num(top + plot_h + 16)
        << "\" text-anchor=\"middle\">" << escape(groups[g]) << "</text>\n";
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    const double ly = top + 16.0 * static_cast<double>(s);
    svg << "<rect x=\"" << num(left + plot_w + 20) << "\" y=\"" << num(ly) << "\" width=\"10\" "
        << "height=\"10\" fill=\"" << kPalette[s % std::size(kPalette)] << "\"/>\n";
    svg << "<text x=\"" << num(left + plot_w + 36) << "\" y=\"" << num(ly + 9) << "\">"
        << escape(series[s].name) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace focus::cli
