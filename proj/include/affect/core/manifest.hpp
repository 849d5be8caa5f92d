#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace affect::core {

struct AffectiveSample {
    std::string image_path;
    double valence = 0.0;
    double arousal = 0.0;
    std::string source_dataset;
    std::optional<std::string> caption;
};

// (v', a') target the adapters drive images toward. Components live in
// [-1, 1]: the neutral default is (0.5, 0); the bidirectional experiment
// pushes both axes to the extremes.
struct EmotionReference {
    double valence_ref = 0.5;
    double arousal_ref = 0.0;
    void validate() const;
};

struct EmotionRating {
    double valence = 0.0;
    double arousal = 0.0;
};

struct RatingScale {
    double min = 0.0;
    double max = 1.0;
};

struct DatasetManifest {
    std::vector<AffectiveSample> entries;
    std::map<std::string, RatingScale> scale_metadata;
    bool normalized = false;

    // no duplicate paths; every source_dataset covered by scale_metadata
    void validate() const;
};

// CSV with header path,valence,arousal,dataset[,caption] plus sidecar scale
// table dataset,min,max. Ratings are kept raw; call normalize_ratings next.
DatasetManifest ingest_manifest(const std::string& manifest_csv, const std::string& scales_csv);

// Affine map (r - min) / (max - min) per source scale, clamped to [0,1].
// Throws on a degenerate scale (min == max).
DatasetManifest normalize_ratings(const DatasetManifest& m);

void write_manifest(const DatasetManifest& m, const std::string& manifest_csv,
                    const std::string& scales_csv);

} // namespace affect::core
