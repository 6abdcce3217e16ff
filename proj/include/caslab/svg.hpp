#pragma once

#include <string>
#include <utility>
#include <vector>

namespace caslab {

struct PlotSeries {
    std::string name;
    std::vector<std::pair<double, double>> points;
    bool line = true;  // polyline, otherwise scatter
};

struct PlotMarker {
    double x = 0, y = 0;
    std::string label;
};

struct Plot {
    std::string title, xlabel, ylabel;
    std::vector<PlotSeries> series;
    std::vector<PlotMarker> markers;
};

// Plain SVG 1.1, panels side by side. Series with non-finite points or no points
// are skipped and reported in `warnings`.
std::string render_svg(const std::vector<Plot>& panels, std::vector<std::string>* warnings = nullptr);

} // namespace caslab
