#pragma once

#include <string>
#include <vector>

#include "memerl/telemetry.hpp"

namespace memerl {

struct PlotOptions {
    std::size_t window = 0;  // 0 = default_smoothing_window(run length)
    int width = 800;
    int height = 420;
    std::string title = "GRPO training dynamics";
};

struct PlotResult {
    std::string svg;
    std::size_t window = 1;  // smoothing window actually used
    std::vector<std::string> warnings;
};

/// Dual-axis line chart: smoothed mean group reward on the left axis, smoothed mean completion
/// length on the right. Output bytes depend only on the input rows and options.
PlotResult plot_telemetry(const std::vector<TelemetryRecord>& rows, const PlotOptions& options = {});

}  // namespace memerl
