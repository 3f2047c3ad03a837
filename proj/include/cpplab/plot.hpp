#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "cpp_sim.hpp"
#include "io.hpp"

namespace cpplab {

struct PlotFiles {
    std::string svg;
    std::string csv;
};

namespace detail {

struct Frame {
    double width = 640, height = 400, margin = 50;
    double x0, x1, y0, y1;

    double px(double x) const { return margin + (x - x0) / (x1 - x0) * (width - 2 * margin); }
    double py(double y) const { return height - margin - (y - y0) / (y1 - y0) * (height - 2 * margin); }
};

inline std::string num(double v) {
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
}

inline std::string svg_open(const Frame& f, const std::string& title) {
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(f.width) + "\" height=\"" + num(f.height) + "\">\n";
    s += "<title>" + title + "</title>\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<line class=\"axis\" x1=\"" + num(f.margin) + "\" y1=\"" + num(f.height - f.margin) + "\" x2=\"" + num(f.width - f.margin) +
         "\" y2=\"" + num(f.height - f.margin) + "\" stroke=\"black\"/>\n";
    s += "<line class=\"axis\" x1=\"" + num(f.margin) + "\" y1=\"" + num(f.margin) + "\" x2=\"" + num(f.margin) + "\" y2=\"" +
         num(f.height - f.margin) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num(f.width / 2) + "\" y=\"" + num(f.margin / 2) + "\" text-anchor=\"middle\">" + title + "</text>\n";
    return s;
}

inline std::string polyline(const Frame& f, const std::vector<double>& xs, const std::vector<double>& ys,
                            const std::string& cls, const std::string& color) {
    std::string pts;
    for (std::size_t i = 0; i < xs.size(); ++i)
        if (std::isfinite(ys[i])) pts += num(f.px(xs[i])) + "," + num(f.py(ys[i])) + " ";
    return "<polyline class=\"" + cls + "\" fill=\"none\" stroke=\"" + color + "\" points=\"" + pts + "\"/>\n";
}

inline std::string legend(const Frame& f, const std::vector<std::pair<std::string, std::string>>& items) {
    std::string s;
    double y = f.margin + 10;
    for (const auto& [label, color] : items) {
        s += "<text x=\"" + num(f.width - f.margin - 150) + "\" y=\"" + num(y) + "\" fill=\"" + color + "\">" + label + "</text>\n";
        y += 16;
    }
    return s;
}

}  // namespace detail

// Teeth hang from the time axis down to their depth; the origin branch sits at t = 0.
inline PlotFiles comb_plot(const CombTree& t) {
    detail::Frame f{640, 400, 50, 0.0, t.T_z > 0 ? t.T_z : 1.0, t.z, 0.0};
    std::string s = detail::svg_open(f, "comb (" + std::to_string(t.atoms.size()) + " atoms)");
    s += "<line class=\"origin\" x1=\"" + detail::num(f.px(0)) + "\" y1=\"" + detail::num(f.py(0)) + "\" x2=\"" +
         detail::num(f.px(0)) + "\" y2=\"" + detail::num(f.py(t.z)) + "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    CsvWriter w({"branch", "t", "x"});
    w.row(kOriginBranch, 0.0, t.z);
    for (std::size_t i = 0; i < t.atoms.size(); ++i) {
        const auto& a = t.atoms[i];
        s += "<line class=\"tooth\" x1=\"" + detail::num(f.px(a.t)) + "\" y1=\"" + detail::num(f.py(0)) + "\" x2=\"" +
             detail::num(f.px(a.t)) + "\" y2=\"" + detail::num(f.py(a.x)) + "\" stroke=\"steelblue\"/>\n";
        w.row(i, a.t, a.x);
    }
    return {s + "</svg>\n", w.str()};
}

// Empirical mean tail counts against the expected tail intensity.
inline PlotFiles spectrum_plot(const std::vector<double>& q, const std::vector<double>& empirical,
                               const std::vector<double>& expected) {
    if (q.empty() || q.size() != empirical.size() || q.size() != expected.size())
        throw std::invalid_argument("spectrum_plot: q, empirical and expected need equal nonzero lengths");
    double ymax = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) ymax = std::max({ymax, empirical[i], expected[i]});
    detail::Frame f{640, 400, 50, q.front(), q.back() > q.front() ? q.back() : q.front() + 1, 0.0, ymax > 0 ? ymax * 1.05 : 1.0};
    std::string s = detail::svg_open(f, "spectrum tail");
    s += detail::polyline(f, q, empirical, "empirical", "steelblue");
    s += detail::polyline(f, q, expected, "expected", "firebrick");
    s += detail::legend(f, {{"empirical", "steelblue"}, {"expected", "firebrick"}});
    CsvWriter w({"q", "empirical", "expected"});
    for (std::size_t i = 0; i < q.size(); ++i) w.row(q[i], empirical[i], expected[i]);
    return {s + "</svg>\n", w.str()};
}

// Empirical CDF of a sample against a reference CDF on a uniform grid.
inline PlotFiles cdf_plot(std::vector<double> sample, const std::function<double(double)>& cdf, std::size_t grid = 200,
                          const std::string& title = "cdf") {
    std::erase_if(sample, [](double v) { return std::isnan(v); });
    if (sample.empty()) throw std::invalid_argument("cdf_plot: empty sample");
    std::sort(sample.begin(), sample.end());
    const double lo = sample.front(), hi = sample.back() > lo ? sample.back() : lo + 1;
    std::vector<double> xs(grid), emp(grid), ref(grid);
    for (std::size_t i = 0; i < grid; ++i) {
        xs[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid - 1);
        emp[i] = static_cast<double>(std::upper_bound(sample.begin(), sample.end(), xs[i]) - sample.begin()) /
                 static_cast<double>(sample.size());
        ref[i] = cdf(xs[i]);
    }
    detail::Frame f{640, 400, 50, lo, hi, 0.0, 1.0};
    std::string s = detail::svg_open(f, title);
    s += detail::polyline(f, xs, emp, "empirical", "steelblue");
    s += detail::polyline(f, xs, ref, "reference", "firebrick");
    s += detail::legend(f, {{"empirical", "steelblue"}, {"reference", "firebrick"}});
    CsvWriter w({"x", "empirical", "reference"});
    for (std::size_t i = 0; i < grid; ++i) w.row(xs[i], emp[i], ref[i]);
    return {s + "</svg>\n", w.str()};
}

}  // namespace cpplab
