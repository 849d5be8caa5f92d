#pragma once

#include "affect/adapters/parametric.hpp"
#include "affect/adapters/style.hpp"
#include "affect/diffusion/guidance.hpp"
#include "affect/eval/distribution.hpp"
#include "affect/eval/stats.hpp"
#include "affect/metrics/property_metrics.hpp"
#include "affect/util/csv.hpp"

#include <optional>
#include <string>
#include <vector>

namespace affect::eval {

enum class Method { parametric, style, diffusion, cg_only, manual, grayscale, original };
Method method_from_string(const std::string& s);
std::string to_string(Method m);

// Read-only bundle of trained models; each experiment checks it has what the
// chosen method needs.
struct ModelSet {
    const reg::PixelRegressor* regressor = nullptr;
    const sem::Embedder* embedder = nullptr;
    const adapters::Disentangler* disentangler = nullptr;
    const diffusion::DenoiserModel* denoiser = nullptr;
    const reg::GuidanceRegressor* guidance = nullptr;
    const diffusion::NoiseSchedule* sampler = nullptr;

    void require(Method m) const;
    FeatureFn feature_fn() const;   // distribution-score embedder (backbone features)
    std::string embedder_id() const;
};

// symmetry features from the trained backbone's first two conv blocks
class BackboneSymmetryFeatures : public metrics::SymmetryFeatures {
public:
    explicit BackboneSymmetryFeatures(const reg::PixelRegressor& r) : r_(&r) {}
    std::string name() const override;
    metrics::PlaneXd feature_map(const core::Image& img, int channel) const override;
    int channels() const override { return 24; }
    int mirror_channel(int c) const override { return c; }

private:
    const reg::PixelRegressor* r_;
};

struct SweepConfig {
    Method method = Method::parametric;
    double similarity_weight = 1.0; // w1, or the CFG scale for diffusion methods
    std::vector<double> weights;    // w2 values, or s values for diffusion/cg
    core::EmotionReference reference{0.5, 0.0};
    std::string corpus_manifest;
    std::string corpus_scales;
    std::uint64_t seed = 0;
    int iters = 200;                // optimizer budget per image
    std::string manual_params_path; // manual baseline parameter file
    std::string cache_dir;          // diffusion inversion cache
    int jobs = 1;

    void validate() const;
};

struct SweepTables {
    csv::Table summary;   // one row per weight
    csv::Table per_image; // one row per (weight, image)
};

// Criteria-alignment sweep: adapts every corpus image at every weight and
// aggregates predicted emotion, reconstruction, FID/KID and the property
// metrics per weight.
SweepTables run_weight_sweep(const SweepConfig& cfg, const ModelSet& models);

struct BidirectionalConfig {
    Method method = Method::parametric; // parametric | style | diffusion
    double similarity_weight = 1.0;
    double adaptation_weight = 0.2;
    std::vector<double> offsets{-0.2, -0.1, 0.1, 0.2}; // relative references
    std::string corpus_manifest;
    std::string corpus_scales;
    std::uint64_t seed = 0;
    int iters = 100;
    std::string cache_dir;
    int jobs = 1;
};

// Bidirectional-reference experiment: relative per-image references for the
// optimization methods, the two absolute extremes for diffusion; offset 0
// rows carry the original images' inferred values.
SweepTables run_bidirectional(const BidirectionalConfig& cfg, const ModelSet& models);

// Property-metric report over a manifest (corpus stats from the same set).
csv::Table metrics_report(const std::string& manifest_path, const std::string& scales_path,
                          const ModelSet& models);

// Renders every *.csv in in_dir that has a weight/offset axis into SVG line
// plots under out_dir, one per numeric column, series split by method.
void render_report(const std::string& in_dir, const std::string& out_dir);

} // namespace affect::eval
