#include "nsbayes/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace nsbayes::svg {

namespace {

constexpr double kW = 640, kH = 420, kL = 70, kR = 150, kT = 40, kB = 55;
const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string esc(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '&': o += "&amp;"; break;
      default: o += c;
    }
  }
  return o;
}

std::string num(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3g", v);
  return b;
}

struct Axis {
  double lo = 0, hi = 1;
  bool log = false;
  double map(double v, double a, double b) const {
    const double t = log ? (std::log10(v) - lo) / (hi - lo) : (v - lo) / (hi - lo);
    return a + t * (b - a);
  }
  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      for (int e = int(std::floor(lo)); e <= int(std::ceil(hi)); ++e)
        if (e >= lo - 1e-9 && e <= hi + 1e-9) out.push_back(std::pow(10.0, e));
      if (out.size() < 2) out = {std::pow(10.0, lo), std::pow(10.0, hi)};
      return out;
    }
    for (int i = 0; i <= 4; ++i) out.push_back(lo + (hi - lo) * i / 4);
    return out;
  }
};

Axis fit(std::vector<double> v, bool log) {
  Axis a;
  a.log = log;
  if (log) {
    std::erase_if(v, [](double x) { return !(x > 0.0) || !std::isfinite(x); });
    for (auto& x : v) x = std::log10(x);
  } else {
    std::erase_if(v, [](double x) { return !std::isfinite(x); });
  }
  if (v.empty()) return a;
  a.lo = *std::min_element(v.begin(), v.end());
  a.hi = *std::max_element(v.begin(), v.end());
  if (a.hi - a.lo < 1e-12) {
    a.lo -= log ? 0.5 : std::max(1.0, std::abs(a.lo)) * 0.5;
    a.hi += log ? 0.5 : std::max(1.0, std::abs(a.hi)) * 0.5;
  } else if (!log) {
    const double pad = 0.05 * (a.hi - a.lo);
    a.lo -= pad;
    a.hi += pad;
  }
  return a;
}

void frame(std::ostream& os, const std::string& title, const std::string& xlabel, const std::string& ylabel) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << (kL + (kW - kL - kR) / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << esc(title)
     << "</text>\n"
     << "<rect x=\"" << kL << "\" y=\"" << kT << "\" width=\"" << (kW - kL - kR) << "\" height=\"" << (kH - kT - kB)
     << "\" fill=\"none\" stroke=\"black\"/>\n"
     << "<text x=\"" << (kL + (kW - kL - kR) / 2) << "\" y=\"" << (kH - 12) << "\" text-anchor=\"middle\">" << esc(xlabel)
     << "</text>\n"
     << "<text transform=\"translate(16," << (kT + (kH - kT - kB) / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
     << esc(ylabel) << "</text>\n";
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << body;
}

}  // namespace

void LinePlot::write(const std::filesystem::path& path) const {
  std::vector<double> xs, ys;
  for (const auto& s : series) {
    xs.insert(xs.end(), s.x.begin(), s.x.end());
    ys.insert(ys.end(), s.y.begin(), s.y.end());
  }
  ys.insert(ys.end(), hlines.begin(), hlines.end());
  const Axis ax = fit(xs, logx), ay = fit(ys, logy);
  const double x0 = kL, x1 = kW - kR, y0 = kH - kB, y1 = kT;
  std::ostringstream os;
  frame(os, title, xlabel, ylabel);
  for (double t : ax.ticks()) {
    const double px = ax.map(t, x0, x1);
    os << "<line x1=\"" << px << "\" y1=\"" << y0 << "\" x2=\"" << px << "\" y2=\"" << (y0 + 4)
       << "\" stroke=\"black\"/><text x=\"" << px << "\" y=\"" << (y0 + 17) << "\" text-anchor=\"middle\">" << num(t)
       << "</text>\n";
  }
  for (double t : ay.ticks()) {
    const double py = ay.map(t, y0, y1);
    os << "<line x1=\"" << (x0 - 4) << "\" y1=\"" << py << "\" x2=\"" << x0 << "\" y2=\"" << py
       << "\" stroke=\"black\"/><text x=\"" << (x0 - 6) << "\" y=\"" << (py + 4) << "\" text-anchor=\"end\">" << num(t)
       << "</text>\n";
  }
  for (double h : hlines) {
    if (logy && !(h > 0.0)) continue;
    const double py = ay.map(h, y0, y1);
    os << "<line x1=\"" << x0 << "\" y1=\"" << py << "\" x2=\"" << x1 << "\" y2=\"" << py
       << "\" stroke=\"gray\" stroke-dasharray=\"5,4\"/>\n";
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    std::ostringstream pts;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if ((logx && !(s.x[i] > 0.0)) || (logy && !(s.y[i] > 0.0)) || !std::isfinite(s.y[i])) continue;
      const double px = ax.map(s.x[i], x0, x1), py = ay.map(s.y[i], y0, y1);
      pts << px << ',' << py << ' ';
      if (s.markers) os << "<circle cx=\"" << px << "\" cy=\"" << py << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"" << pts.str() << "\"/>\n";
    const double ly = kT + 14 + 18 * double(k);
    os << "<line x1=\"" << (x1 + 10) << "\" y1=\"" << ly << "\" x2=\"" << (x1 + 30) << "\" y2=\"" << ly << "\" stroke=\""
       << color << "\" stroke-width=\"2\"/><text x=\"" << (x1 + 35) << "\" y=\"" << (ly + 4) << "\">" << esc(s.label)
       << "</text>\n";
  }
  os << "</svg>\n";
  write_file(path, os.str());
}

void BarPlot::write(const std::filesystem::path& path) const {
  std::vector<double> ys = values;
  ys.insert(ys.end(), hlines.begin(), hlines.end());
  ys.push_back(0.0);
  const Axis ay = fit(ys, false);
  const double x0 = kL, x1 = kW - kR, y0 = kH - kB, y1 = kT;
  std::ostringstream os;
  frame(os, title, "", ylabel);
  for (double t : ay.ticks()) {
    const double py = ay.map(t, y0, y1);
    os << "<text x=\"" << (x0 - 6) << "\" y=\"" << (py + 4) << "\" text-anchor=\"end\">" << num(t) << "</text>\n";
  }
  const double slot = (x1 - x0) / double(std::max<std::size_t>(values.size(), 1));
  const double base = ay.map(0.0, y0, y1);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double top = ay.map(values[i], y0, y1);
    const double x = x0 + slot * (double(i) + 0.15);
    os << "<rect x=\"" << x << "\" y=\"" << std::min(top, base) << "\" width=\"" << slot * 0.7 << "\" height=\""
       << std::abs(base - top) << "\" fill=\"" << kPalette[0] << "\"/>\n";
    if (i < labels.size())
      os << "<text x=\"" << (x + slot * 0.35) << "\" y=\"" << (y0 + 17) << "\" text-anchor=\"middle\">" << esc(labels[i])
         << "</text>\n";
  }
  for (double h : hlines) {
    const double py = ay.map(h, y0, y1);
    os << "<line x1=\"" << x0 << "\" y1=\"" << py << "\" x2=\"" << x1 << "\" y2=\"" << py
       << "\" stroke=\"#d62728\" stroke-dasharray=\"5,4\"/>\n";
  }
  os << "</svg>\n";
  write_file(path, os.str());
}

}  // namespace nsbayes::svg
