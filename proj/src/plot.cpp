#include "memerl/plot.hpp"

#include <algorithm>
#include <cmath>

#include "memerl/util.hpp"

namespace memerl {

namespace {

struct Range {
    double lo = 0.0, hi = 1.0;
};

Range range_of(const std::vector<double>& xs) {
    if (xs.empty()) return {};
    Range r{*std::min_element(xs.begin(), xs.end()), *std::max_element(xs.begin(), xs.end())};
    if (r.hi - r.lo < 1e-12) {
        const double pad = std::max(0.5, std::abs(r.lo) * 0.1);
        r.lo -= pad;
        r.hi += pad;
    } else {
        const double pad = 0.05 * (r.hi - r.lo);
        r.lo -= pad;
        r.hi += pad;
    }
    return r;
}

std::string num(double v) { return strprintf("%.2f", v); }

std::string label(double v) { return strprintf("%.3g", v); }

}  // namespace

PlotResult plot_telemetry(const std::vector<TelemetryRecord>& rows, const PlotOptions& options) {
    PlotResult res;
    const std::size_t n = rows.size();
    std::size_t window = options.window == 0 ? default_smoothing_window(n) : options.window;
    if (n == 0) {
        res.warnings.push_back("telemetry has no rows; emitting empty axes");
    } else if (window > n) {
        res.warnings.push_back(strprintf(
            "smoothing window %zu exceeds run length %zu; smoothing over the %zu available points", window, n, n));
        window = n;
    }
    res.window = std::max<std::size_t>(window, 1);

    std::vector<double> reward, length, steps;
    for (const auto& r : rows) {
        reward.push_back(r.mean_reward);
        length.push_back(r.mean_len);
        steps.push_back(static_cast<double>(r.step));
    }
    reward = moving_average(reward, res.window);
    length = moving_average(length, res.window);

    const double W = options.width, H = options.height;
    const double left = 70, right = W - 70, top = 50, bottom = H - 60;
    const Range rx = steps.empty() ? Range{0, 1}
                                   : (steps.front() == steps.back() ? Range{steps.front() - 1, steps.back() + 1}
                                                                    : Range{steps.front(), steps.back()});
    const Range ry = range_of(reward), rl = range_of(length);
    auto sx = [&](double x) { return left + (x - rx.lo) / (rx.hi - rx.lo) * (right - left); };
    auto sy = [&](double y, const Range& r) { return bottom - (y - r.lo) / (r.hi - r.lo) * (bottom - top); };

    std::string s;
    s += strprintf("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" viewBox=\"0 0 %d %d\">\n",
                   options.width, options.height, options.width, options.height);
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + num(W / 2) + "\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" +
         options.title + "</text>\n";
    s += "<g stroke=\"black\" stroke-width=\"1\">\n";
    s += "<line x1=\"" + num(left) + "\" y1=\"" + num(bottom) + "\" x2=\"" + num(right) + "\" y2=\"" + num(bottom) + "\"/>\n";
    s += "<line x1=\"" + num(left) + "\" y1=\"" + num(top) + "\" x2=\"" + num(left) + "\" y2=\"" + num(bottom) + "\"/>\n";
    s += "<line x1=\"" + num(right) + "\" y1=\"" + num(top) + "\" x2=\"" + num(right) + "\" y2=\"" + num(bottom) + "\"/>\n";
    s += "</g>\n<g font-family=\"sans-serif\" font-size=\"11\">\n";
    for (int i = 0; i <= 5; ++i) {
        const double f = i / 5.0;
        const double yl = ry.lo + f * (ry.hi - ry.lo), yr = rl.lo + f * (rl.hi - rl.lo);
        const double py = bottom - f * (bottom - top);
        s += "<text x=\"" + num(left - 6) + "\" y=\"" + num(py + 4) + "\" text-anchor=\"end\" fill=\"#1f77b4\">" +
             label(yl) + "</text>\n";
        s += "<text x=\"" + num(right + 6) + "\" y=\"" + num(py + 4) + "\" text-anchor=\"start\" fill=\"#d62728\">" +
             label(yr) + "</text>\n";
        const double xv = rx.lo + f * (rx.hi - rx.lo);
        s += "<text x=\"" + num(sx(xv)) + "\" y=\"" + num(bottom + 16) + "\" text-anchor=\"middle\">" + label(xv) +
             "</text>\n";
    }
    s += "<text x=\"" + num(W / 2) + "\" y=\"" + num(H - 20) + "\" text-anchor=\"middle\">step</text>\n";
    s += "<text x=\"18\" y=\"" + num((top + bottom) / 2) + "\" text-anchor=\"middle\" fill=\"#1f77b4\" transform=\"rotate(-90 18 " +
         num((top + bottom) / 2) + ")\">mean group reward</text>\n";
    s += "<text x=\"" + num(W - 18) + "\" y=\"" + num((top + bottom) / 2) +
         "\" text-anchor=\"middle\" fill=\"#d62728\" transform=\"rotate(90 " + num(W - 18) + " " +
         num((top + bottom) / 2) + ")\">mean completion length (tokens)</text>\n";
    s += "</g>\n";

    auto polyline = [&](const std::vector<double>& ys, const Range& r, const char* color, const char* id) {
        std::string pts;
        for (std::size_t i = 0; i < ys.size(); ++i) {
            if (i) pts += ' ';
            pts += num(sx(steps[i])) + "," + num(sy(ys[i], r));
        }
        return strprintf("<polyline id=\"%s\" fill=\"none\" stroke=\"%s\" stroke-width=\"2\" points=\"", id, color) +
               pts + "\"/>\n";
    };
    s += polyline(reward, ry, "#1f77b4", "reward");
    s += polyline(length, rl, "#d62728", "length");

    const double lx = left + 12, ly = top + 8;
    s += "<g font-family=\"sans-serif\" font-size=\"12\">\n";
    s += "<rect x=\"" + num(lx - 6) + "\" y=\"" + num(ly - 4) +
         "\" width=\"250\" height=\"44\" fill=\"white\" stroke=\"#999999\"/>\n";
    s += "<line x1=\"" + num(lx) + "\" y1=\"" + num(ly + 8) + "\" x2=\"" + num(lx + 24) + "\" y2=\"" + num(ly + 8) +
         "\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + num(lx + 30) + "\" y=\"" + num(ly + 12) + "\">" +
         strprintf("mean group reward (MA %zu)", res.window) + "</text>\n";
    s += "<line x1=\"" + num(lx) + "\" y1=\"" + num(ly + 28) + "\" x2=\"" + num(lx + 24) + "\" y2=\"" + num(ly + 28) +
         "\" stroke=\"#d62728\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + num(lx + 30) + "\" y=\"" + num(ly + 32) + "\">" +
         strprintf("mean completion length (MA %zu)", res.window) + "</text>\n";
    s += "</g>\n</svg>\n";
    res.svg = std::move(s);
    return res;
}

}  // namespace memerl
