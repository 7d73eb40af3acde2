#pragma once

#include <vector>

namespace lcurve {

// Predicted performance on a grid of sizes with a central interval at `level`.
// Values are not clipped to [0, 1].
struct CurvePrediction {
    std::vector<double> sizes;
    std::vector<double> mean;
    std::vector<double> lower;
    std::vector<double> upper;
    double level = 0.95;
};

} // namespace lcurve
