#pragma once

#include "affect/core/image.hpp"
#include "affect/core/manifest.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace affect::adapters {

struct AdaptationResult {
    core::Image adapted;
    std::string params_or_code; // method-specific solution, JSON text
    std::vector<double> loss_trace;
    core::EmotionRating emotion_before;
    core::EmotionRating emotion_after;

    void validate() const {
        adapted.validate();
        for (double v : loss_trace)
            if (!std::isfinite(v)) throw std::runtime_error("adaptation result: non-finite loss trace");
    }
};

} // namespace affect::adapters
