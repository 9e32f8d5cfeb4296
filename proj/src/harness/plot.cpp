#include "gacg/harness/plot.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace gacg::harness {

namespace fs = std::filesystem;

namespace {

struct Series {
  std::vector<double> step;
  std::vector<double> value;
};

Series read_series(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PlotError("plot: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw PlotError("plot: '" + path + "' is empty");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw PlotError("plot: column '" + name + "' missing in '" + path + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto step_col = column("step"), value_col = column("capture_rate");

  Series s;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size()) {
      throw PlotError("plot: row width differs from header in '" + path + "'");
    }
    try {
      s.step.push_back(std::stod(cells[step_col]));
      s.value.push_back(std::stod(cells[value_col]));
    } catch (const std::exception&) {
      throw PlotError("plot: non-numeric value in '" + path + "'");
    }
  }
  if (s.step.empty()) throw PlotError("plot: '" + path + "' has no data rows");
  return s;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string xml_escape(const std::string& text) {
  std::string out;
  for (char ch : text) {
    switch (ch) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

}  // namespace

std::string run_label(const std::string& csv_path) {
  const fs::path parent = fs::path(csv_path).parent_path();
  const std::string name = parent.filename().string();
  if (name.rfind("seed", 0) == 0 && parent.has_parent_path()) {
    const auto grand = parent.parent_path().filename().string();
    if (!grand.empty()) return grand;
  }
  if (!name.empty()) return name;
  return fs::path(csv_path).stem().string();
}

void emit_plots(const std::vector<std::string>& csv_paths, const std::string& out_svg) {
  if (csv_paths.empty()) throw PlotError("plot: no input files");
  std::map<std::string, std::vector<Series>> groups;
  for (const auto& p : csv_paths) groups[run_label(p)].push_back(read_series(p));

  struct Curve {
    std::string label;
    std::vector<double> x, mean, lo, hi;
    std::size_t runs = 0;
  };
  std::vector<Curve> curves;
  double x_max = 0.0;
  for (const auto& [label, runs] : groups) {
    Curve c;
    c.label = label;
    c.runs = runs.size();
    std::size_t len = std::numeric_limits<std::size_t>::max();
    for (const auto& r : runs) len = std::min(len, r.step.size());
    for (std::size_t i = 0; i < len; ++i) {
      double xs = 0.0, sum = 0.0, lo = 1e300, hi = -1e300;
      for (const auto& r : runs) {
        xs += r.step[i];
        sum += r.value[i];
        lo = std::min(lo, r.value[i]);
        hi = std::max(hi, r.value[i]);
      }
      const double k = static_cast<double>(runs.size());
      c.x.push_back(xs / k);
      c.mean.push_back(sum / k);
      c.lo.push_back(lo);
      c.hi.push_back(hi);
    }
    x_max = std::max(x_max, c.x.back());
    curves.push_back(std::move(c));
  }
  if (x_max <= 0.0) x_max = 1.0;

  const double width = 720, height = 440, left = 70, right = 170, top = 30, bottom = 60;
  const double pw = width - left - right, ph = height - top - bottom;
  auto px = [&](double x) { return left + pw * x / x_max; };
  auto py = [&](double y) { return top + ph * (1.0 - std::clamp(y, 0.0, 1.0)); };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width
      << "\" height=\"" << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double y = i / 5.0;
    svg << "<line x1=\"" << num(left) << "\" y1=\"" << num(py(y)) << "\" x2=\""
        << num(left + pw) << "\" y2=\"" << num(py(y)) << "\" stroke=\"#e0e0e0\"/>\n"
        << "<text x=\"" << num(left - 8) << "\" y=\"" << num(py(y) + 4)
        << "\" text-anchor=\"end\">" << num(y) << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double x = x_max * i / 4.0;
    svg << "<text x=\"" << num(px(x)) << "\" y=\"" << num(top + ph + 18)
        << "\" text-anchor=\"middle\">" << static_cast<long long>(x) << "</text>\n";
  }
  svg << "<line x1=\"" << num(left) << "\" y1=\"" << num(top + ph) << "\" x2=\""
      << num(left + pw) << "\" y2=\"" << num(top + ph) << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << num(left) << "\" y1=\"" << num(top) << "\" x2=\"" << num(left)
      << "\" y2=\"" << num(top + ph) << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(height - 15)
      << "\" text-anchor=\"middle\">step</text>\n"
      << "<text transform=\"translate(18," << num(top + ph / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">capture_rate</text>\n";

  for (std::size_t ci = 0; ci < curves.size(); ++ci) {
    const auto& c = curves[ci];
    const char* color = kPalette[ci % std::size(kPalette)];
    if (c.runs > 1) {
      svg << "<polygon class=\"band\" fill=\"" << color << "\" fill-opacity=\"0.2\" points=\"";
      for (std::size_t i = 0; i < c.x.size(); ++i) svg << num(px(c.x[i])) << ',' << num(py(c.hi[i])) << ' ';
      for (std::size_t i = c.x.size(); i-- > 0;) svg << num(px(c.x[i])) << ',' << num(py(c.lo[i])) << ' ';
      svg << "\"/>\n";
    }
    svg << "<polyline class=\"mean\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < c.x.size(); ++i) svg << num(px(c.x[i])) << ',' << num(py(c.mean[i])) << ' ';
    svg << "\"/>\n";
    const double ly = top + 14 + 18 * static_cast<double>(ci);
    svg << "<line x1=\"" << num(left + pw + 12) << "\" y1=\"" << num(ly) << "\" x2=\""
        << num(left + pw + 32) << "\" y2=\"" << num(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << num(left + pw + 38) << "\" y=\"" << num(ly + 4) << "\">" << xml_escape(c.label)
        << " (n=" << c.runs << ")</text>\n";
  }
  svg << "</svg>\n";

  const fs::path out(out_svg);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream file(out, std::ios::trunc);
  if (!file) throw PlotError("plot: cannot write '" + out_svg + "'");
  file << svg.str();
}

}  // namespace gacg::harness
