#include "caslab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace caslab {

namespace {

constexpr double panel_w = 480, panel_h = 360, ml = 64, mr = 16, mt = 32, mb = 48;
const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#17becf"};

std::string num(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.2f", v);
    return b;
}

std::string tick(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.3g", v);
    return b;
}

std::string esc(const std::string& s) {
    std::string o;
    for (char c : s) {
        switch (c) {
        case '&': o += "&amp;"; break;
        case '<': o += "&lt;"; break;
        case '>': o += "&gt;"; break;
        case '"': o += "&quot;"; break;
        default: o += c;
        }
    }
    return o;
}

struct Range {
    double lo = INFINITY, hi = -INFINITY;
    void add(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void finish() {
        if (!(lo <= hi)) lo = 0, hi = 1;
        if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
            double pad = std::max(0.5, 0.5 * std::abs(hi));
            lo -= pad, hi += pad;
        } else {
            double pad = 0.05 * (hi - lo);
            lo -= pad, hi += pad;
        }
    }
};

bool finite_series(const PlotSeries& s) {
    if (s.points.empty()) return false;
    for (auto [x, y] : s.points)
        if (!std::isfinite(x) || !std::isfinite(y)) return false;
    return true;
}

void panel(std::ostringstream& o, const Plot& p, double x0, std::vector<std::string>* warnings) {
    std::vector<const PlotSeries*> good;
    for (const auto& s : p.series) {
        if (finite_series(s))
            good.push_back(&s);
        else if (warnings)
            warnings->push_back("skipped series '" + s.name + "' in plot '" + p.title + "': empty or non-finite");
    }
    Range rx, ry;
    for (auto* s : good)
        for (auto [x, y] : s->points) rx.add(x), ry.add(y);
    for (const auto& m : p.markers)
        if (std::isfinite(m.x) && std::isfinite(m.y)) rx.add(m.x), ry.add(m.y);
    rx.finish();
    ry.finish();
    const double w = panel_w - ml - mr, h = panel_h - mt - mb;
    auto X = [&](double x) { return x0 + ml + (x - rx.lo) / (rx.hi - rx.lo) * w; };
    auto Y = [&](double y) { return mt + h - (y - ry.lo) / (ry.hi - ry.lo) * h; };

    o << "<g>\n";
    o << "<text x=\"" << num(x0 + ml + w / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << esc(p.title)
      << "</text>\n";
    o << "<rect x=\"" << num(x0 + ml) << "\" y=\"" << num(mt) << "\" width=\"" << num(w) << "\" height=\"" << num(h)
      << "\" fill=\"none\" stroke=\"#000\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        double vx = rx.lo + (rx.hi - rx.lo) * i / 4, vy = ry.lo + (ry.hi - ry.lo) * i / 4;
        o << "<text x=\"" << num(X(vx)) << "\" y=\"" << num(mt + h + 16) << "\" text-anchor=\"middle\" font-size=\"10\">"
          << tick(vx) << "</text>\n";
        o << "<text x=\"" << num(x0 + ml - 4) << "\" y=\"" << num(Y(vy) + 3) << "\" text-anchor=\"end\" font-size=\"10\">"
          << tick(vy) << "</text>\n";
    }
    o << "<text x=\"" << num(x0 + ml + w / 2) << "\" y=\"" << num(panel_h - 10)
      << "\" text-anchor=\"middle\" font-size=\"12\">" << esc(p.xlabel) << "</text>\n";
    o << "<text x=\"" << num(x0 + 14) << "\" y=\"" << num(mt + h / 2) << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 "
      << num(x0 + 14) << " " << num(mt + h / 2) << ")\">" << esc(p.ylabel) << "</text>\n";
    std::size_t k = 0;
    for (auto* s : good) {
        const char* color = palette[k++ % std::size(palette)];
        if (s->line) {
            o << "<polyline class=\"series\" data-name=\"" << esc(s->name) << "\" fill=\"none\" stroke=\"" << color
              << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t i = 0; i < s->points.size(); ++i)
                o << (i ? " " : "") << num(X(s->points[i].first)) << "," << num(Y(s->points[i].second));
            o << "\"/>\n";
        } else {
            o << "<g class=\"series\" data-name=\"" << esc(s->name) << "\" fill=\"" << color << "\">\n";
            for (auto [x, y] : s->points) o << "<circle cx=\"" << num(X(x)) << "\" cy=\"" << num(Y(y)) << "\" r=\"2.5\"/>\n";
            o << "</g>\n";
        }
    }
    for (const auto& m : p.markers) {
        if (!std::isfinite(m.x) || !std::isfinite(m.y)) continue;
        o << "<circle class=\"marker\" cx=\"" << num(X(m.x)) << "\" cy=\"" << num(Y(m.y))
          << "\" r=\"5\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\"/>\n";
        o << "<text x=\"" << num(X(m.x) + 8) << "\" y=\"" << num(Y(m.y) - 8) << "\" font-size=\"11\" fill=\"#d62728\">"
          << esc(m.label) << "</text>\n";
    }
    o << "</g>\n";
}

} // namespace

std::string render_svg(const std::vector<Plot>& panels, std::vector<std::string>* warnings) {
    const double width = panel_w * double(std::max<std::size_t>(panels.size(), 1));
    std::ostringstream o;
    o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << num(width) << "\" height=\"" << num(panel_h)
      << "\" viewBox=\"0 0 " << num(width) << " " << num(panel_h) << "\" font-family=\"sans-serif\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n";
    if (panels.empty()) panel(o, Plot{}, 0, warnings);
    for (std::size_t i = 0; i < panels.size(); ++i) panel(o, panels[i], panel_w * double(i), warnings);
    o << "</svg>\n";
    return o.str();
}

} // namespace caslab
