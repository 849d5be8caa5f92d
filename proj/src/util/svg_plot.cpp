#include "affect/util/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace affect::svg {

namespace {
const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
}

void write_line_plot(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<Series>& series) {
    constexpr double W = 640, H = 420, ml = 70, mr = 20, mt = 40, mb = 50;
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    if (!std::isfinite(xmin) || !std::isfinite(ymin))
        throw std::invalid_argument("svg: no finite data to plot");
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) {
        ymax += 0.5;
        ymin -= 0.5;
    }
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    auto sx = [&](double v) { return ml + (v - xmin) / (xmax - xmin) * (W - ml - mr); };
    auto sy = [&](double v) { return H - mb - (v - ymin) / (ymax - ymin) * (H - mt - mb); };

    std::ofstream out(path);
    if (!out) throw std::runtime_error("svg: cannot write " + path);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H
        << "' font-family='sans-serif' font-size='12'>\n";
    out << "<rect width='100%' height='100%' fill='white'/>\n";
    out << "<text x='" << W / 2 << "' y='20' text-anchor='middle' font-size='15'>" << title
        << "</text>\n";
    // axes
    out << "<line x1='" << ml << "' y1='" << H - mb << "' x2='" << W - mr << "' y2='" << H - mb
        << "' stroke='black'/>\n";
    out << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << H - mb
        << "' stroke='black'/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = xmin + k * (xmax - xmin) / 4;
        const double yv = ymin + k * (ymax - ymin) / 4;
        out << "<text x='" << sx(xv) << "' y='" << H - mb + 18 << "' text-anchor='middle'>" << xv
            << "</text>\n";
        out << "<text x='" << ml - 8 << "' y='" << sy(yv) + 4 << "' text-anchor='end'>" << yv
            << "</text>\n";
        out << "<line x1='" << sx(xv) << "' y1='" << H - mb << "' x2='" << sx(xv) << "' y2='"
            << H - mb + 4 << "' stroke='black'/>\n";
    }
    out << "<text x='" << W / 2 << "' y='" << H - 12 << "' text-anchor='middle'>" << x_label
        << "</text>\n";
    out << "<text x='16' y='" << H / 2 << "' transform='rotate(-90 16 " << H / 2
        << ")' text-anchor='middle'>" << y_label << "</text>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kColors[si % 6];
        out << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
        for (std::size_t i = 0; i < s.x.size(); ++i) out << sx(s.x[i]) << "," << sy(s.y[i]) << " ";
        out << "'/>\n";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            out << "<circle cx='" << sx(s.x[i]) << "' cy='" << sy(s.y[i]) << "' r='2.5' fill='"
                << color << "'/>\n";
        out << "<text x='" << W - mr - 6 << "' y='" << mt + 16 * static_cast<double>(si)
            << "' text-anchor='end' fill='" << color << "'>" << s.label << "</text>\n";
    }
    out << "</svg>\n";
}

} // namespace affect::svg
