#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "shipems/csv.hpp"

namespace shipems {

// Dependency-free SVG line charts for learning curves and cost comparisons.

struct PlotSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;
    std::string color = "#1f77b4";
};

struct PlotBand {  // e.g. mean +/- std confidence band
    std::vector<std::pair<double, double>> lower;
    std::vector<std::pair<double, double>> upper;
    std::string color = "#aec7e8";
};

inline std::string svg_line_chart(const std::string& title, const std::string& x_label,
                                  const std::string& y_label,
                                  const std::vector<PlotSeries>& series,
                                  const PlotBand* band = nullptr) {
    const double w = 860, h = 520;
    const double ml = 80, mr = 30, mt = 50, mb = 60;

    double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
    double y_min = x_min, y_max = -x_min;
    auto scan = [&](const std::vector<std::pair<double, double>>& pts) {
        for (const auto& [x, y] : pts) {
            x_min = std::min(x_min, x);
            x_max = std::max(x_max, x);
            y_min = std::min(y_min, y);
            y_max = std::max(y_max, y);
        }
    };
    for (const auto& s : series) scan(s.points);
    if (band) {
        scan(band->lower);
        scan(band->upper);
    }
    if (!(x_min < x_max)) {
        x_min -= 1.0;
        x_max += 1.0;
    }
    if (!(y_min < y_max)) {
        y_min -= 1.0;
        y_max += 1.0;
    }
    const double y_pad = 0.05 * (y_max - y_min);
    y_min -= y_pad;
    y_max += y_pad;

    auto px = [&](double x) { return ml + (x - x_min) / (x_max - x_min) * (w - ml - mr); };
    auto py = [&](double y) { return h - mb - (y - y_min) / (y_max - y_min) * (h - mt - mb); };
    auto num = [&](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.6g", v);
        return std::string(buf);
    };

    std::string svg;
    svg += "<svg xmlns='http://www.w3.org/2000/svg' width='" + num(w) + "' height='" + num(h) +
           "' viewBox='0 0 " + num(w) + " " + num(h) + "'>\n";
    svg += "<rect width='100%' height='100%' fill='white'/>\n";
    svg += "<text x='" + num(w / 2) + "' y='24' font-size='18' text-anchor='middle'>" + title +
           "</text>\n";

    // axes with 6 ticks each
    svg += "<g font-size='12' fill='#333'>\n";
    for (int i = 0; i <= 5; ++i) {
        const double xv = x_min + (x_max - x_min) * i / 5.0;
        const double yv = y_min + (y_max - y_min) * i / 5.0;
        svg += "<line x1='" + num(px(xv)) + "' y1='" + num(h - mb) + "' x2='" + num(px(xv)) +
               "' y2='" + num(mt) + "' stroke='#eee'/>\n";
        svg += "<line x1='" + num(ml) + "' y1='" + num(py(yv)) + "' x2='" + num(w - mr) +
               "' y2='" + num(py(yv)) + "' stroke='#eee'/>\n";
        svg += "<text x='" + num(px(xv)) + "' y='" + num(h - mb + 18) +
               "' text-anchor='middle'>" + num(xv) + "</text>\n";
        svg += "<text x='" + num(ml - 8) + "' y='" + num(py(yv) + 4) +
               "' text-anchor='end'>" + num(yv) + "</text>\n";
    }
    svg += "</g>\n";
    svg += "<line x1='" + num(ml) + "' y1='" + num(h - mb) + "' x2='" + num(w - mr) + "' y2='" +
           num(h - mb) + "' stroke='black'/>\n";
    svg += "<line x1='" + num(ml) + "' y1='" + num(h - mb) + "' x2='" + num(ml) + "' y2='" +
           num(mt) + "' stroke='black'/>\n";
    svg += "<text x='" + num(w / 2) + "' y='" + num(h - 14) +
           "' font-size='14' text-anchor='middle'>" + x_label + "</text>\n";
    svg += "<text x='20' y='" + num(h / 2) + "' font-size='14' text-anchor='middle' transform='rotate(-90 20 " +
           num(h / 2) + ")'>" + y_label + "</text>\n";

    if (band && band->lower.size() == band->upper.size() && !band->lower.empty()) {
        std::string d = "M";
        for (const auto& [x, y] : band->upper) d += num(px(x)) + "," + num(py(y)) + " ";
        for (auto it = band->lower.rbegin(); it != band->lower.rend(); ++it)
            d += num(px(it->first)) + "," + num(py(it->second)) + " ";
        svg += "<path d='" + d + "Z' fill='" + band->color + "' fill-opacity='0.5' stroke='none'/>\n";
    }

    double legend_y = mt + 6;
    for (const auto& s : series) {
        if (s.points.empty()) continue;
        std::string pts;
        for (const auto& [x, y] : s.points) pts += num(px(x)) + "," + num(py(y)) + " ";
        svg += "<polyline points='" + pts + "' fill='none' stroke='" + s.color +
               "' stroke-width='1.8'/>\n";
        svg += "<line x1='" + num(w - mr - 150) + "' y1='" + num(legend_y) + "' x2='" +
               num(w - mr - 120) + "' y2='" + num(legend_y) + "' stroke='" + s.color +
               "' stroke-width='3'/>\n";
        svg += "<text x='" + num(w - mr - 114) + "' y='" + num(legend_y + 4) +
               "' font-size='12'>" + s.label + "</text>\n";
        legend_y += 18;
    }
    svg += "</svg>\n";
    return svg;
}

inline void write_svg_chart(const std::string& path, const std::string& title,
                            const std::string& x_label, const std::string& y_label,
                            const std::vector<PlotSeries>& series,
                            const PlotBand* band = nullptr) {
    write_text_file(path, svg_line_chart(title, x_label, y_label, series, band));
}

}  // namespace shipems
