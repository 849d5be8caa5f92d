#pragma once

#include "affect/core/image.hpp"
#include "affect/core/manifest.hpp"

#include <string>

namespace affect::eval {

// Procedural desk-scale corpora. Labels are assigned by measuring the saved
// files with the property-metric definitions (valence = mean brightness,
// arousal = mean saturation), so the ground truth is exact by construction.
//
// kinds:
//   affect  - gradient + shape compositions spanning brightness/saturation
//   shapes  - two-class captioned corpus (bright circle / dark square) for
//             the diffusion stack
core::DatasetManifest synth_corpus(const std::string& kind, int count, int size,
                                   std::uint64_t seed, const std::string& out_dir);

// one image from the affect family without touching disk (fuzz helpers)
core::Image synth_affect_image(int size, std::uint64_t seed);

} // namespace affect::eval
