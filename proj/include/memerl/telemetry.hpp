#pragma once

#include <cstddef>
#include <deque>
#include <string>
#include <string_view>
#include <vector>

namespace memerl {

inline constexpr std::string_view kTelemetryHeader = "step,mean_reward,mean_len,mean_think_len,loss,kl,clip_frac";

struct TelemetryRecord {
    std::size_t step = 0;
    double mean_reward = 0.0;
    double mean_len = 0.0;        // sampled tokens per completion, end-of-sequence excluded
    double mean_think_len = 0.0;  // tokens inside the think block
    double loss = 0.0;
    double kl = 0.0;              // per-completion sum over visited states, averaged
    double clip_frac = 0.0;

    bool operator==(const TelemetryRecord&) const = default;
};

std::string telemetry_csv_row(const TelemetryRecord& r);
std::string telemetry_to_csv(const std::vector<TelemetryRecord>& rows);

/// Throws HeaderMismatch when the first line is not exactly kTelemetryHeader.
std::vector<TelemetryRecord> telemetry_from_csv(std::string_view csv);

/// Trailing moving average; the first window-1 entries average what is available.
std::vector<double> moving_average(const std::vector<double>& xs, std::size_t window);

/// Means of consecutive non-overlapping blocks of `window` entries (a short tail block is kept).
std::vector<double> block_means(const std::vector<double>& xs, std::size_t window);

/// Default smoothing window for a run of `n` steps: n / 10, at least 5.
std::size_t default_smoothing_window(std::size_t n);

/// Flags reward-driven shrinkage of the think segment: fires once the moving average of
/// the think length drops below `fraction` of the average over the first `window` steps.
class CollapseMonitor {
public:
    CollapseMonitor(double fraction = 0.5, std::size_t window = 10);

    /// Feeds one step's mean think length; returns true when the collapse flag is raised.
    bool observe(double mean_think_len);

    bool collapsed() const { return collapsed_; }
    bool has_baseline() const { return baseline_ready_; }
    double baseline() const { return baseline_; }
    double current() const;
    std::size_t observed() const { return observed_; }

private:
    double fraction_;
    std::size_t window_;
    std::deque<double> recent_;
    double recent_sum_ = 0.0;
    double baseline_ = 0.0;
    bool baseline_ready_ = false;
    bool collapsed_ = false;
    std::size_t observed_ = 0;
};

}  // namespace memerl
