#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "calibnet/calibration.hpp"
#include "calibnet/network.hpp"
#include "calibnet/partition.hpp"

namespace calibnet::svg {

inline const char* phase_color(int i) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                    "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f"};
    return palette[i % 10];
}

class Canvas {
public:
    explicit Canvas(const DiscDomain& d, double size = 640.0, double margin = 20.0)
        : d_(d), size_(size), margin_(margin), scale_((size - 2.0 * margin) / (2.0 * d.radius)) {
        char buf[256];
        std::snprintf(buf, sizeof buf,
                      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n"
                      "<rect width=\"100%%\" height=\"100%%\" fill=\"white\"/>\n",
                      size, size, size, size);
        body_ = buf;
    }

    double X(double x) const { return margin_ + (x - d_.center.x + d_.radius) * scale_; }
    double Y(double y) const { return margin_ + (d_.center.y + d_.radius - y) * scale_; }
    double L(double len) const { return len * scale_; }

    void line(Vec2 a, Vec2 b, const char* color, double width, double opacity = 1.0, bool round = false) {
        char buf[320];
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%.3f\" y1=\"%.3f\" x2=\"%.3f\" y2=\"%.3f\" stroke=\"%s\" stroke-width=\"%.3f\" "
                      "stroke-opacity=\"%.3f\"%s/>\n",
                      X(a.x), Y(a.y), X(b.x), Y(b.y), color, width, opacity,
                      round ? " stroke-linecap=\"round\"" : "");
        body_ += buf;
    }

    void circle(Vec2 c, double r, const char* stroke, const char* fill, double width, double fill_opacity = 1.0) {
        char buf[320];
        std::snprintf(buf, sizeof buf,
                      "<circle cx=\"%.3f\" cy=\"%.3f\" r=\"%.3f\" stroke=\"%s\" fill=\"%s\" stroke-width=\"%.3f\" "
                      "fill-opacity=\"%.3f\"/>\n",
                      X(c.x), Y(c.y), L(r), stroke, fill, width, fill_opacity);
        body_ += buf;
    }

    void arrow(Vec2 a, Vec2 b, const char* color) {
        line(a, b, color, 1.2);
        Vec2 d = b - a;
        double n = norm(d);
        if (n == 0.0) return;
        Vec2 u = d / n, w = perp(u);
        double head = 0.3 * n;
        line(b, b - u * head + w * (0.5 * head), color, 1.2);
        line(b, b - u * head - w * (0.5 * head), color, 1.2);
    }

    std::string finish() const { return body_ + "</svg>\n"; }

private:
    DiscDomain d_;
    double size_, margin_, scale_;
    std::string body_;
};

inline void draw_network(Canvas& cv, const Network& net) {
    cv.circle(net.domain.center, net.domain.radius, "black", "none", 1.0);
    for (int e = 0; e < static_cast<int>(net.edges.size()); ++e) cv.line(net.A(e), net.B(e), "black", 2.0);
    auto inc = net.incidence();
    for (int v = 0; v < static_cast<int>(net.vertices.size()); ++v)
        if (inc[v].size() >= 3) cv.circle(net.vertices[v], 0.008 * net.domain.radius, "black", "black", 1.0);
}

// The network with its dumbbell neighbourhood shaded: round-capped tubes of half-width delta r
// around the segments and r-balls around junctions and boundary endpoints.
inline std::string plot_partition(const FlatPartition& p, const LocalizationScales* scales) {
    Canvas cv(p.net.domain);
    if (scales) {
        auto fd = decompose_features(p);
        const double r = scales->r_bar;
        for (int c : fd.segments)
            cv.line(p.net.A(c), p.net.B(c), "#9ecae1", cv.L(2.0 * scales->delta * r), 0.6);
        for (const auto& pf : fd.points) cv.circle(p.net.vertices[pf.vertex], r, "#6baed6", "#c6dbef", 0.8, 0.6);
    }
    draw_network(cv, p.net);
    return cv.finish();
}

inline std::string plot_network(const Network& net) {
    Canvas cv(net.domain);
    draw_network(cv, net);
    return cv.finish();
}

// Arrow glyphs for every phase field on a square grid clipped to the disc.
inline std::string plot_field(const CalibrationField& f, int grid = 48) {
    const Network& net = f.partition.net;
    Canvas cv(net.domain);
    const double R = net.domain.radius;
    const double step = 2.0 * R / grid;
    const double M = std::max(f.max_aux_norm(), 1e-300);
    const int P = f.phases();
    for (const auto& pf : f.features.points)
        cv.circle(net.vertices[pf.vertex], f.scales.r_bar, "#dddddd", "none", 0.8);
    draw_network(cv, net);
    std::vector<Vec2> xi(P);
    for (int a = 0; a < grid; ++a)
        for (int b = 0; b < grid; ++b) {
            Vec2 x = net.domain.center + Vec2{-R + (a + 0.5) * step, -R + (b + 0.5) * step};
            if (!net.domain.contains(x, 0.0)) continue;
            f.eval_all(x, xi.data());
            for (int i = 0; i < P; ++i)
                if (norm(xi[i]) > 1e-12 * M) cv.arrow(x, x + xi[i] * (0.45 * step / M), phase_color(i));
        }
    return cv.finish();
}

}  // namespace calibnet::svg
