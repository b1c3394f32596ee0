#pragma once

#include <string>
#include <vector>

namespace qnet {

// Minimal static SVG line charts for run artifacts.
struct PlotSeries {
    std::string label;
    std::vector<double> x, y;
};

struct PlotOptions {
    std::string title, xlabel, ylabel;
    bool log_y = false;
    int width = 860, height = 480;
};

std::string line_chart_svg(const std::vector<PlotSeries>& series, const PlotOptions& opts);

}  // namespace qnet
