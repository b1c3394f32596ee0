#include "qnet/plot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace qnet {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string num(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

}  // namespace

std::string line_chart_svg(const std::vector<PlotSeries>& series, const PlotOptions& opts) {
    const int W = opts.width, H = opts.height;
    const int ml = 70, mr = 20, mt = 40, mb = 50;

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            double y = s.y[i];
            if (opts.log_y) {
                if (!(y > 0)) continue;
                y = std::log10(y);
            }
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    }
    if (!(xmax > xmin)) {
        xmax = xmin + 1;
    }
    if (!(ymax > ymin)) {
        ymax = ymin + 1;
    }
    const double xs = (W - ml - mr) / (xmax - xmin);
    const double ys = (H - mt - mb) / (ymax - ymin);
    auto px = [&](double x) { return ml + (x - xmin) * xs; };
    auto py = [&](double y) { return H - mb - (y - ymin) * ys; };

    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H
        << "' viewBox='0 0 " << W << " " << H << "'>\n";
    svg << "<rect width='100%' height='100%' fill='white'/>\n";
    svg << "<text x='" << W / 2 << "' y='22' text-anchor='middle' font-size='15'>"
        << opts.title << "</text>\n";

    // axes with 5 ticks each
    svg << "<g stroke='#333' fill='none'><path d='M" << ml << " " << mt << " V" << H - mb
        << " H" << W - mr << "'/></g>\n";
    for (int i = 0; i <= 5; ++i) {
        const double xv = xmin + (xmax - xmin) * i / 5.0;
        const double yv = ymin + (ymax - ymin) * i / 5.0;
        svg << "<text x='" << num(px(xv)) << "' y='" << H - mb + 18
            << "' text-anchor='middle' font-size='11'>" << num(xv) << "</text>\n";
        svg << "<text x='" << ml - 6 << "' y='" << num(py(yv) + 4)
            << "' text-anchor='end' font-size='11'>"
            << num(opts.log_y ? std::pow(10.0, yv) : yv) << "</text>\n";
        svg << "<line x1='" << ml << "' y1='" << num(py(yv)) << "' x2='" << W - mr << "' y2='"
            << num(py(yv)) << "' stroke='#ddd'/>\n";
    }
    svg << "<text x='" << W / 2 << "' y='" << H - 12
        << "' text-anchor='middle' font-size='12'>" << opts.xlabel << "</text>\n";
    svg << "<text x='16' y='" << H / 2 << "' font-size='12' transform='rotate(-90 16 "
        << H / 2 << ")' text-anchor='middle'>" << opts.ylabel << "</text>\n";

    int ci = 0;
    for (const auto& s : series) {
        const char* color = kPalette[ci % 8];
        svg << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            double y = s.y[i];
            if (opts.log_y) {
                if (!(y > 0)) continue;
                y = std::log10(y);
            }
            svg << num(px(s.x[i])) << "," << num(py(y)) << " ";
        }
        svg << "'/>\n";
        svg << "<text x='" << W - mr - 8 << "' y='" << mt + 16 + 16 * ci
            << "' text-anchor='end' font-size='12' fill='" << color << "'>" << s.label
            << "</text>\n";
        ++ci;
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace qnet
