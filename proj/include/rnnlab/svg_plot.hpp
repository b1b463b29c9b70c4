#pragma once

// Self-contained SVG line plots: path elements with optional shaded bands
// (mean +- std style), linear or log10 y axis, tick labels, and a legend.
// No external renderer; output is a plain .svg file.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "csv.hpp"
#include "matrix.hpp"

namespace rnnlab {

struct PlotSeries {
    std::string label;
    Vector x;
    Vector y;
    Vector lo;  // optional band bounds; empty or same length as x
    Vector hi;
    std::string color;  // empty = palette by index
};

struct PlotOptions {
    std::string title;
    std::string xlabel;
    std::string ylabel;
    bool log_y = false;
    int width = 720;
    int height = 480;
};

namespace detail {

inline const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                 "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};
inline constexpr int kPaletteSize = 8;

struct AxisRange {
    double lo = 0.0, hi = 1.0;
};

inline void grow(AxisRange& r, double v) {
    r.lo = std::min(r.lo, v);
    r.hi = std::max(r.hi, v);
}

// Tick spacing of the form {1,2,5} * 10^k closest to spanning ~target steps.
inline std::vector<double> nice_ticks(double lo, double hi, int target = 5) {
    if (!(hi > lo)) return {lo};
    const double raw = (hi - lo) / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double mult : {1.0, 2.0, 5.0, 10.0}) {
        if (mag * mult >= raw) {
            step = mag * mult;
            break;
        }
    }
    std::vector<double> ticks;
    double t = std::ceil(lo / step) * step;
    for (; t <= hi + 0.5 * step; t += step) {
        double v = std::abs(t) < step * 1e-9 ? 0.0 : t;
        ticks.push_back(v);
    }
    return ticks;
}

inline std::string tick_label(double v) {
    // trim the shortest-round-trip form a little for axis use
    std::string s = format_double(v);
    return s;
}

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace detail

inline void write_svg_plot(const std::string& path, const std::vector<PlotSeries>& series,
                           const PlotOptions& opt) {
    const double ml = 70, mr = 20, mt = opt.title.empty() ? 20 : 44, mb = 56;
    const double pw = opt.width - ml - mr;
    const double ph = opt.height - mt - mb;
    require(pw > 10 && ph > 10, "write_svg_plot: canvas too small");

    auto ty = [&](double v) {
        if (!opt.log_y) return v;
        return v > 0.0 ? std::log10(v) : std::numeric_limits<double>::quiet_NaN();
    };

    detail::AxisRange xr{std::numeric_limits<double>::infinity(),
                         -std::numeric_limits<double>::infinity()};
    detail::AxisRange yr = xr;
    for (const auto& s : series) {
        require(s.x.size() == s.y.size(), "write_svg_plot: x/y length mismatch");
        require(s.lo.size() == s.hi.size() && (s.lo.empty() || s.lo.size() == s.x.size()),
                "write_svg_plot: band length mismatch");
        for (size_t i = 0; i < s.x.size(); ++i) {
            const double yv = ty(s.y[i]);
            if (!std::isfinite(s.x[i]) || !std::isfinite(yv)) continue;
            detail::grow(xr, s.x[i]);
            detail::grow(yr, yv);
            if (!s.lo.empty()) {
                const double lv = ty(s.lo[i]), hv = ty(s.hi[i]);
                if (std::isfinite(lv)) detail::grow(yr, lv);
                if (std::isfinite(hv)) detail::grow(yr, hv);
            }
        }
    }
    if (!(xr.hi > xr.lo)) {
        xr.lo -= 0.5;
        xr.hi += 0.5;
    }
    if (!(yr.hi > yr.lo)) {
        yr.lo -= 0.5;
        yr.hi += 0.5;
    }
    const double ypad = 0.05 * (yr.hi - yr.lo);
    yr.lo -= ypad;
    yr.hi += ypad;

    auto px = [&](double v) { return ml + (v - xr.lo) / (xr.hi - xr.lo) * pw; };
    auto py = [&](double v) { return mt + ph - (v - yr.lo) / (yr.hi - yr.lo) * ph; };

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_svg_plot: cannot open " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\""
        << opt.height << "\" viewBox=\"0 0 " << opt.width << " " << opt.height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<g font-family=\"sans-serif\" font-size=\"12\" fill=\"#222\">\n";

    if (!opt.title.empty())
        out << "<text x=\"" << opt.width / 2.0 << "\" y=\"24\" text-anchor=\"middle\" "
            << "font-size=\"16\">" << detail::xml_escape(opt.title) << "</text>\n";

    // gridlines and ticks
    for (double t : detail::nice_ticks(yr.lo, yr.hi)) {
        const double y = py(t);
        out << "<line x1=\"" << ml << "\" y1=\"" << y << "\" x2=\"" << ml + pw << "\" y2=\"" << y
            << "\" stroke=\"#ddd\"/>\n";
        const std::string lbl = opt.log_y ? ("1e" + detail::tick_label(t)) : detail::tick_label(t);
        out << "<text x=\"" << ml - 6 << "\" y=\"" << y + 4
            << "\" text-anchor=\"end\">" << lbl << "</text>\n";
    }
    for (double t : detail::nice_ticks(xr.lo, xr.hi)) {
        const double x = px(t);
        out << "<line x1=\"" << x << "\" y1=\"" << mt << "\" x2=\"" << x << "\" y2=\"" << mt + ph
            << "\" stroke=\"#eee\"/>\n";
        out << "<text x=\"" << x << "\" y=\"" << mt + ph + 18 << "\" text-anchor=\"middle\">"
            << detail::tick_label(t) << "</text>\n";
    }
    out << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << opt.height - 14
        << "\" text-anchor=\"middle\">" << detail::xml_escape(opt.xlabel) << "</text>\n";
    out << "<text x=\"18\" y=\"" << mt + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
        << mt + ph / 2 << ")\">" << detail::xml_escape(opt.ylabel) << "</text>\n";

    // bands first so lines draw on top
    for (size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        if (s.lo.empty()) continue;
        const std::string color =
            s.color.empty() ? detail::kPalette[si % detail::kPaletteSize] : s.color;
        std::string fwd, back;
        for (size_t i = 0; i < s.x.size(); ++i) {
            const double lv = ty(s.lo[i]), hv = ty(s.hi[i]);
            if (!std::isfinite(s.x[i]) || !std::isfinite(lv) || !std::isfinite(hv)) continue;
            fwd += (fwd.empty() ? "M" : "L") + format_double(px(s.x[i])) + " " +
                   format_double(py(hv));
            back = "L" + format_double(px(s.x[i])) + " " + format_double(py(lv)) + back;
        }
        if (!fwd.empty())
            out << "<path d=\"" << fwd << back << "Z\" fill=\"" << color
                << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    }

    for (size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const std::string color =
            s.color.empty() ? detail::kPalette[si % detail::kPaletteSize] : s.color;
        std::string d;
        bool pen_down = false;
        for (size_t i = 0; i < s.x.size(); ++i) {
            const double yv = ty(s.y[i]);
            if (!std::isfinite(s.x[i]) || !std::isfinite(yv)) {
                pen_down = false;  // break the line at gaps
                continue;
            }
            d += (pen_down ? "L" : "M") + format_double(px(s.x[i])) + " " +
                 format_double(py(yv));
            pen_down = true;
        }
        if (!d.empty())
            out << "<path d=\"" << d << "\" fill=\"none\" stroke=\"" << color
                << "\" stroke-width=\"1.6\"/>\n";
        if (s.x.size() == 1 && std::isfinite(ty(s.y[0])))
            out << "<circle cx=\"" << px(s.x[0]) << "\" cy=\"" << py(ty(s.y[0]))
                << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }

    // legend
    double ly = mt + 14;
    for (size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        if (s.label.empty()) continue;
        const std::string color =
            s.color.empty() ? detail::kPalette[si % detail::kPaletteSize] : s.color;
        const double lx = ml + pw - 150;
        out << "<line x1=\"" << lx << "\" y1=\"" << ly - 4 << "\" x2=\"" << lx + 24 << "\" y2=\""
            << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << lx + 30 << "\" y=\"" << ly << "\">" << detail::xml_escape(s.label)
            << "</text>\n";
        ly += 16;
    }

    out << "</g>\n</svg>\n";
}

}  // namespace rnnlab
