#pragma once

#include "affect/core/image.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace affect::core {

// Decodes PNG or JPEG (sniffed from the payload). 1-channel files load as
// GRAY, 3-channel as RGB; 8- and 16-bit PNG are scaled to [0,1].
Image load_image(const std::string& path);

// 8-bit RGB/GRAY PNG. Values are clamped then rounded at quantization time.
void save_png(const Image& img, const std::string& path);

// Raw 8-bit sample dump in row-major y,x,c order (shared by tests and hashing).
std::vector<std::uint8_t> quantize8(const Image& img);

} // namespace affect::core
