#pragma once

#include "affect/core/image.hpp"
#include "affect/metrics/wavelet.hpp"

#include <memory>
#include <string>
#include <vector>

namespace affect::metrics {

// All statistics are computed at a fixed internal analysis resolution, which
// keeps them stable under moderate input rescaling.
inline constexpr int kAnalysisSize = 64;

struct PropertyReport {
    std::string image_id;
    double brightness = 0;
    double saturation = 0;
    double colorfulness = 0;
    double contrast = 0;
    double blur = 0;
    double edge_orientation_entropy = 0;
    double lowfreq_energy = 0;
    double symmetry = 0;
    std::string extractor; // symmetry feature extractor identity

    static std::vector<std::string> csv_header();
    std::vector<std::string> csv_row() const;
};

// Corpus statistics backing the Z-scored wavelet feature.
struct CorpusStats {
    double lowfreq_mean = 0.0;
    double lowfreq_std = 1.0;
    int n = 0;
};

double brightness(const core::Image& img);   // mean HSV value channel
double saturation(const core::Image& img);   // mean HSV saturation
double colorfulness(const core::Image& img); // Hasler-Suesstrunk opponent statistic

// Band-limited local contrast: bandpass-over-lowpass pyramid ratios,
// summarized as the mean RMS across bands.
double contrast(const core::Image& img);

// Re-blur no-reference metric in [0,1]; higher = blurrier.
double blur(const core::Image& img);

// Shannon entropy (bits) of Sobel orientations above the 90th magnitude
// percentile, 16 bins over [0, pi).
double edge_orientation_entropy(const core::Image& img);

// Mean squared detail energy of the two coarsest wavelet levels, summed over
// R,G,B and gray planes (raw, before corpus Z-scoring).
double lowfreq_energy_raw(const core::Image& img);
double lowfreq_energy(const core::Image& img, const CorpusStats& stats);
CorpusStats compute_corpus_stats(const std::vector<double>& raw_energies);

// Feature source for the symmetry statistic. features() returns maps
// [C,H',W']; mirror_channel says which channel a horizontal flip maps onto.
class SymmetryFeatures {
public:
    virtual ~SymmetryFeatures() = default;
    virtual std::string name() const = 0;
    virtual PlaneXd feature_map(const core::Image& img, int channel) const = 0;
    virtual int channels() const = 0;
    virtual int mirror_channel(int c) const = 0;
};

// Fixed even-phase Gabor bank at four orientations; exactly equivariant to
// horizontal mirroring (0<->0, 45<->135, 90<->90), so a mirror-symmetric
// image scores 1.
class GaborBank : public SymmetryFeatures {
public:
    GaborBank();
    std::string name() const override { return "gabor-4x1-even"; }
    PlaneXd feature_map(const core::Image& img, int channel) const override;
    int channels() const override { return 4; }
    int mirror_channel(int c) const override;

private:
    std::vector<PlaneXd> kernels_;
};

// left-right mirror symmetry in [0,1] from normalized feature correlation
double symmetry(const core::Image& img, const SymmetryFeatures& features);

PropertyReport report(const core::Image& img, const CorpusStats& stats,
                      const SymmetryFeatures& features, const std::string& image_id = "");

} // namespace affect::metrics
