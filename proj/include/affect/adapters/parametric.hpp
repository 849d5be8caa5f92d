#pragma once

#include "affect/adapters/result.hpp"
#include "affect/regressor/pixel_regressor.hpp"
#include "affect/semantic/embedder.hpp"
#include "affect/transforms/diff_transforms.hpp"

namespace affect::adapters {

struct ParametricOptions {
    double w1 = 1.0;  // semantic-similarity weight
    double w2 = 0.15; // emotion-distance weight
    int iters = 200;
    double lr = 0.05; // Adam with beta1=0.9, beta2=0
    std::uint64_t seed = 0;
    tx::ParamBounds bounds;
    double stop_tol = 1e-6; // early stop when the best objective stalls
    int stop_window = 20;
};

// Minimizes w1 * (1 - cos(emb(I), emb(T(I,p)))) + w2 * |[v',a'] - R(T(I,p))|
// over the transform parameters, projected onto the bounds box after every
// step; returns the best-objective iterate.
AdaptationResult optimize_params(const core::Image& img, const core::EmotionReference& ref,
                                 const reg::PixelRegressor& R, const sem::Embedder& embedder,
                                 const ParametricOptions& opts);

} // namespace affect::adapters
