#pragma once

#include "affect/core/image.hpp"
#include "affect/core/manifest.hpp"
#include "affect/nn/layers.hpp"
#include "affect/nn/serialize.hpp"

#include <Eigen/Core>

#include <vector>

namespace affect::reg {

struct TrainConfig {
    int epochs = 120;
    int batch_size = 16;
    double lr = 2e-3;
    std::uint64_t seed = 0;
    double validation_fraction = 0.1;
    int patience = 10;   // early stop on validation-MAE plateau
    bool augment_hflip = true;

    void validate() const;
};

struct TrainReport {
    std::vector<double> train_loss;  // per epoch
    std::vector<double> val_mae_valence;
    std::vector<double> val_mae_arousal;
    double best_val_mae_valence = 0.0;
    double best_val_mae_arousal = 0.0;
    int best_epoch = -1;
};

// Pixel-space emotion regressor: 4 conv blocks at 64x64 with a 2-output head
// squashed into [0,1]^2 by a logistic. The post-pool feature vector doubles
// as the desk-scale embedding for distribution metrics and the symmetry
// feature extractor.
class PixelRegressor {
public:
    static constexpr int kInput = 64;
    static constexpr int kFeat = 48;

    explicit PixelRegressor(std::uint64_t seed);

    TrainReport train(const core::DatasetManifest& manifest, const TrainConfig& cfg);

    core::EmotionRating predict(const core::Image& img) const;
    Eigen::VectorXd features(const core::Image& img) const;

    // differentiable paths on [n,3,h,w]
    nn::Var predict_var(const nn::Var& x) const;   // -> [n,2]
    nn::Var features_var(const nn::Var& x) const;  // -> [n,kFeat]
    // feature maps after the first two conv blocks (symmetry extractor)
    nn::Var early_features_var(const nn::Var& x) const;

    // mean absolute error per axis over a manifest
    std::pair<double, double> evaluate_mae(const core::DatasetManifest& manifest) const;

    bool trained() const { return trained_; }
    nn::Checkpoint checkpoint() const;
    static PixelRegressor from_checkpoint(const nn::Checkpoint& ckpt);
    std::string weights_digest() const { return nn::weights_digest(params_); }

private:
    void build(std::uint64_t seed);

    nn::ParamStore params_;
    std::uint64_t seed_;
    bool trained_ = false;
    nn::Var c1w_, c1b_, c2w_, c2b_, c3w_, c3b_, c4w_, c4b_, hw_, hb_;
};

// shared helper: load, convert to RGB and resize every manifest image
std::vector<core::Image> load_manifest_images(const core::DatasetManifest& m, int size);

} // namespace affect::reg
