#include "dora/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "dora/common.hpp"

namespace dora {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 170.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

const char* color(std::size_t i) { return kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))]; }

// Coordinates rounded to 0.01 px keep the files short and stable.
std::string num(double v) { return format_double(std::round(v * 100.0) / 100.0); }

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!(lo <= hi)) {
      lo = 0.0;
      hi = 1.0;
    }
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
};

class Frame {
 public:
  Frame(Range x, Range y, bool log_x) : x_(x), y_(y), log_x_(log_x) {}

  double px(double v) const {
    const double t = log_x_ ? std::log10(v) : v;
    return kLeft + (t - x_.lo) / (x_.hi - x_.lo) * (kWidth - kLeft - kRight);
  }
  double py(double v) const { return kTop + (y_.hi - v) / (y_.hi - y_.lo) * (kHeight - kTop - kBottom); }

  const Range& x() const { return x_; }
  const Range& y() const { return y_; }
  bool log_x() const { return log_x_; }

 private:
  Range x_;
  Range y_;
  bool log_x_;
};

std::string header(const ChartMeta& meta) {
  std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
       "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\">\n";
  s += "<metadata>config_hash=" + xml_escape(meta.config_hash) + " seed=" + std::to_string(meta.seed) +
       "</metadata>\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) + "\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" +
       xml_escape(meta.title) + "</text>\n";
  return s;
}

std::string axes(const Frame& f, const ChartMeta& meta, bool x_ticks = true) {
  const double x0 = kLeft;
  const double x1 = kWidth - kRight;
  const double y0 = kHeight - kBottom;
  const double y1 = kTop;
  std::string s = "<g stroke=\"black\" stroke-width=\"1\" fill=\"none\">\n";
  s += "<path d=\"M" + num(x0) + " " + num(y1) + " L" + num(x0) + " " + num(y0) + " L" + num(x1) + " " + num(y0) +
       "\"/>\n</g>\n";
  s += "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = f.y().lo + (f.y().hi - f.y().lo) * k / 4.0;
    const double y = f.py(v);
    s += "<text x=\"" + num(x0 - 6) + "\" y=\"" + num(y + 4) + "\" text-anchor=\"end\">" + num(v) + "</text>\n";
  }
  if (x_ticks) {
    for (int k = 0; k <= 4; ++k) {
      const double t = f.x().lo + (f.x().hi - f.x().lo) * k / 4.0;
      const double v = f.log_x() ? std::pow(10.0, t) : t;
      s += "<text x=\"" + num(f.px(v)) + "\" y=\"" + num(y0 + 16) + "\" text-anchor=\"middle\">" + num(v) +
           "</text>\n";
    }
  }
  s += "<text x=\"" + num((x0 + x1) / 2) + "\" y=\"" + num(kHeight - 12) + "\" text-anchor=\"middle\">" +
       xml_escape(meta.x_label) + "</text>\n";
  s += "<text x=\"16\" y=\"" + num((y0 + y1) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       num((y0 + y1) / 2) + ")\">" + xml_escape(meta.y_label) + "</text>\n";
  s += "</g>\n";
  return s;
}

std::string legend(const std::vector<std::string>& names) {
  std::string s = "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double y = kTop + 10 + 18.0 * static_cast<double>(i);
    s += "<rect x=\"" + num(kWidth - kRight + 14) + "\" y=\"" + num(y - 8) + "\" width=\"10\" height=\"10\" fill=\"" +
         color(i) + "\"/>\n";
    s += "<text x=\"" + num(kWidth - kRight + 30) + "\" y=\"" + num(y + 1) + "\">" + xml_escape(names[i]) +
         "</text>\n";
  }
  s += "</g>\n";
  return s;
}

Frame frame_for(const std::vector<Series>& series, bool log_x, bool square) {
  Range x;
  Range y;
  for (const Series& s : series) {
    for (const auto& [a, b] : s.points) {
      if (log_x && !(a > 0.0)) continue;
      x.add(log_x ? std::log10(a) : a);
      y.add(b);
    }
  }
  if (square) {
    const double lo = std::min(x.lo, y.lo);
    const double hi = std::max(x.hi, y.hi);
    x.lo = y.lo = lo;
    x.hi = y.hi = hi;
  }
  x.finish();
  y.finish();
  return Frame(x, y, log_x);
}

std::vector<std::string> names_of(const std::vector<Series>& series) {
  std::vector<std::string> n;
  for (const Series& s : series) n.push_back(s.name);
  return n;
}

}  // namespace

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string line_chart(const std::vector<Series>& series, const ChartMeta& meta) {
  const Frame f = frame_for(series, meta.log_x, false);
  std::string s = header(meta) + axes(f, meta);
  for (std::size_t i = 0; i < series.size(); ++i) {
    std::string d;
    for (const auto& [a, b] : series[i].points) {
      if (!std::isfinite(b) || (meta.log_x && !(a > 0.0))) continue;
      d += (d.empty() ? "M" : " L") + num(f.px(a)) + " " + num(f.py(b));
    }
    if (d.empty()) continue;
    s += "<path d=\"" + d + "\" fill=\"none\" stroke=\"" + color(i) + "\" stroke-width=\"2\"/>\n";
    for (const auto& [a, b] : series[i].points) {
      if (!std::isfinite(b) || (meta.log_x && !(a > 0.0))) continue;
      s += "<circle cx=\"" + num(f.px(a)) + "\" cy=\"" + num(f.py(b)) + "\" r=\"3\" fill=\"" + color(i) + "\"/>\n";
    }
  }
  return s + legend(names_of(series)) + "</svg>\n";
}

std::string scatter_chart(const std::vector<Series>& series, const ChartMeta& meta, bool diagonal) {
  const Frame f = frame_for(series, false, diagonal);
  std::string s = header(meta) + axes(f, meta);
  if (diagonal) {
    s += "<path d=\"M" + num(f.px(f.x().lo)) + " " + num(f.py(f.x().lo)) + " L" + num(f.px(f.x().hi)) + " " +
         num(f.py(f.x().hi)) + "\" stroke=\"#999999\" stroke-dasharray=\"4 3\" fill=\"none\"/>\n";
  }
  for (std::size_t i = 0; i < series.size(); ++i) {
    for (const auto& [a, b] : series[i].points) {
      if (!std::isfinite(a) || !std::isfinite(b)) continue;
      s += "<circle cx=\"" + num(f.px(a)) + "\" cy=\"" + num(f.py(b)) + "\" r=\"2\" fill=\"" + color(i) +
           "\" fill-opacity=\"0.5\"/>\n";
    }
  }
  return s + legend(names_of(series)) + "</svg>\n";
}

std::string bar_chart(const std::vector<Bar>& bars, const ChartMeta& meta) {
  std::vector<std::string> groups;
  std::vector<std::string> names;
  for (const Bar& b : bars) {
    if (std::find(groups.begin(), groups.end(), b.group) == groups.end()) groups.push_back(b.group);
    if (std::find(names.begin(), names.end(), b.name) == names.end()) names.push_back(b.name);
  }
  Range y;
  y.add(0.0);
  for (const Bar& b : bars) y.add(b.value);
  y.finish();
  Range x;
  x.lo = 0.0;
  x.hi = static_cast<double>(std::max<std::size_t>(1, groups.size()));
  const Frame f(x, y, false);
  std::string s = header(meta) + axes(f, meta, false);
  const double group_width = (kWidth - kLeft - kRight) / x.hi;
  const double bar_width = 0.8 * group_width / static_cast<double>(std::max<std::size_t>(1, names.size()));
  s += "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (std::size_t g = 0; g < groups.size(); ++g) {
    s += "<text x=\"" + num(kLeft + (g + 0.5) * group_width) + "\" y=\"" + num(kHeight - kBottom + 16) +
         "\" text-anchor=\"middle\">" + xml_escape(groups[g]) + "</text>\n";
  }
  s += "</g>\n";
  for (const Bar& b : bars) {
    const std::size_t g = std::find(groups.begin(), groups.end(), b.group) - groups.begin();
    const std::size_t k = std::find(names.begin(), names.end(), b.name) - names.begin();
    if (!std::isfinite(b.value)) continue;
    const double x0 = kLeft + g * group_width + 0.1 * group_width + k * bar_width;
    const double top = f.py(std::max(0.0, b.value));
    const double bottom = f.py(std::min(0.0, b.value));
    s += "<rect x=\"" + num(x0) + "\" y=\"" + num(top) + "\" width=\"" + num(bar_width) + "\" height=\"" +
         num(bottom - top) + "\" fill=\"" + color(k) + "\"/>\n";
  }
  return s + legend(names) + "</svg>\n";
}

}  // namespace dora
