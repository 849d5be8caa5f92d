#pragma once

#include <string>
#include <vector>

namespace affect::svg {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

// Minimal line chart, one polyline per series, auto-scaled axes.
void write_line_plot(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<Series>& series);

} // namespace affect::svg
