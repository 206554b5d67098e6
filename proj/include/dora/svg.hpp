#pragma once

#include <string>
#include <utility>
#include <vector>

namespace dora {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

struct Bar {
  std::string group;  // x-axis category
  std::string name;   // series within the group
  double value = 0.0;
};

struct ChartMeta {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::string config_hash;
  unsigned long long seed = 0;
  bool log_x = false;
};

// Self-contained SVG documents; the provenance goes in a <metadata> element.
std::string line_chart(const std::vector<Series>& series, const ChartMeta& meta);
std::string scatter_chart(const std::vector<Series>& series, const ChartMeta& meta, bool diagonal = true);
std::string bar_chart(const std::vector<Bar>& bars, const ChartMeta& meta);

std::string xml_escape(const std::string& s);

}  // namespace dora
