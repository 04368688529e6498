#include "memerl/telemetry.hpp"

#include <algorithm>
#include <cstdlib>

#include "memerl/errors.hpp"
#include "memerl/util.hpp"

namespace memerl {

std::string telemetry_csv_row(const TelemetryRecord& r) {
    return strprintf("%zu,", r.step) + format_double(r.mean_reward) + "," + format_double(r.mean_len) + "," +
           format_double(r.mean_think_len) + "," + format_double(r.loss) + "," + format_double(r.kl) + "," +
           format_double(r.clip_frac);
}

std::string telemetry_to_csv(const std::vector<TelemetryRecord>& rows) {
    std::string out(kTelemetryHeader);
    out += '\n';
    for (const auto& r : rows) {
        out += telemetry_csv_row(r);
        out += '\n';
    }
    return out;
}

std::vector<TelemetryRecord> telemetry_from_csv(std::string_view csv) {
    std::vector<TelemetryRecord> rows;
    std::size_t pos = 0;
    bool header = true;
    std::size_t line_no = 0;
    while (pos <= csv.size()) {
        std::size_t end = csv.find('\n', pos);
        if (end == std::string_view::npos) end = csv.size();
        std::string_view line = csv.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos = end + 1;
        ++line_no;
        if (header) {
            if (line != kTelemetryHeader)
                throw HeaderMismatch("telemetry header must be exactly '" + std::string(kTelemetryHeader) + "'");
            header = false;
            continue;
        }
        if (trim(line).empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 7) throw HeaderMismatch(strprintf("telemetry line %zu has %zu fields", line_no, f.size()));
        TelemetryRecord r;
        r.step = std::strtoull(f[0].c_str(), nullptr, 10);
        r.mean_reward = std::strtod(f[1].c_str(), nullptr);
        r.mean_len = std::strtod(f[2].c_str(), nullptr);
        r.mean_think_len = std::strtod(f[3].c_str(), nullptr);
        r.loss = std::strtod(f[4].c_str(), nullptr);
        r.kl = std::strtod(f[5].c_str(), nullptr);
        r.clip_frac = std::strtod(f[6].c_str(), nullptr);
        rows.push_back(r);
    }
    if (header) throw HeaderMismatch("telemetry file is empty");
    return rows;
}

std::vector<double> moving_average(const std::vector<double>& xs, std::size_t window) {
    window = std::max<std::size_t>(window, 1);
    std::vector<double> out(xs.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sum += xs[i];
        if (i >= window) sum -= xs[i - window];
        out[i] = sum / static_cast<double>(std::min(i + 1, window));
    }
    return out;
}

std::vector<double> block_means(const std::vector<double>& xs, std::size_t window) {
    window = std::max<std::size_t>(window, 1);
    std::vector<double> out;
    for (std::size_t b = 0; b < xs.size(); b += window) {
        const std::size_t e = std::min(xs.size(), b + window);
        double s = 0.0;
        for (std::size_t i = b; i < e; ++i) s += xs[i];
        out.push_back(s / static_cast<double>(e - b));
    }
    return out;
}

std::size_t default_smoothing_window(std::size_t n) { return std::max<std::size_t>(5, n / 10); }

CollapseMonitor::CollapseMonitor(double fraction, std::size_t window) : fraction_(fraction), window_(window) {
    if (!(fraction > 0 && fraction < 1)) throw InvalidConfig("collapse fraction must lie in (0, 1)");
    if (window == 0) throw InvalidConfig("collapse window must be positive");
}

double CollapseMonitor::current() const {
    return recent_.empty() ? 0.0 : recent_sum_ / static_cast<double>(recent_.size());
}

bool CollapseMonitor::observe(double mean_think_len) {
    ++observed_;
    recent_.push_back(mean_think_len);
    recent_sum_ += mean_think_len;
    if (recent_.size() > window_) {
        recent_sum_ -= recent_.front();
        recent_.pop_front();
    }
    if (!baseline_ready_) {
        if (observed_ == window_) {
            baseline_ = current();
            baseline_ready_ = true;
        }
        return collapsed_;
    }
    if (baseline_ > 0 && current() < fraction_ * baseline_) collapsed_ = true;
    return collapsed_;
}

}  // namespace memerl
