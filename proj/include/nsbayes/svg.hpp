#pragma once

// Minimal SVG charts written directly to disk.

#include <filesystem>
#include <string>
#include <vector>

namespace nsbayes::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool markers = false;
};

struct LinePlot {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  bool logx = false;
  bool logy = false;
  std::vector<Series> series;
  /// Horizontal reference lines (drawn dashed).
  std::vector<double> hlines;

  void write(const std::filesystem::path& path) const;
};

struct BarPlot {
  std::string title;
  std::string ylabel;
  std::vector<std::string> labels;
  std::vector<double> values;
  std::vector<double> hlines;

  void write(const std::filesystem::path& path) const;
};

}  // namespace nsbayes::svg
