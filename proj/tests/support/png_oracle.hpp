#pragma once

// Minimal independent PNG reader used as a decode oracle in tests. Handles
// 8-bit grayscale/truecolor, no interlace; all five scanline filters.

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace png_oracle {

struct Raster {
    int width = 0, height = 0, channels = 0;
    std::vector<std::uint8_t> samples; // y, x, c
};

inline std::uint32_t be32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) |
           std::uint32_t(p[3]);
}

inline Raster decode_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("png_oracle: cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (bytes.size() < 8 || std::memcmp(bytes.data(), sig, 8) != 0)
        throw std::runtime_error("png_oracle: bad signature");

    Raster r;
    int bit_depth = 0, color_type = 0;
    std::vector<std::uint8_t> idat;
    std::size_t pos = 8;
    while (pos + 8 <= bytes.size()) {
        const std::uint32_t len = be32(&bytes[pos]);
        const std::string type(reinterpret_cast<const char*>(&bytes[pos + 4]), 4);
        const std::uint8_t* data = &bytes[pos + 8];
        if (type == "IHDR") {
            r.width = static_cast<int>(be32(data));
            r.height = static_cast<int>(be32(data + 4));
            bit_depth = data[8];
            color_type = data[9];
            if (data[12] != 0) throw std::runtime_error("png_oracle: interlace unsupported");
        } else if (type == "IDAT") {
            idat.insert(idat.end(), data, data + len);
        } else if (type == "IEND") {
            break;
        }
        pos += 12 + len;
    }
    if (bit_depth != 8 || (color_type != 0 && color_type != 2))
        throw std::runtime_error("png_oracle: only 8-bit gray/rgb supported");
    r.channels = color_type == 2 ? 3 : 1;

    const std::size_t stride = static_cast<std::size_t>(r.width) * r.channels;
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(r.height) * (stride + 1));
    uLongf raw_len = static_cast<uLongf>(raw.size());
    if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        raw_len != raw.size())
        throw std::runtime_error("png_oracle: inflate failed");

    r.samples.assign(static_cast<std::size_t>(r.height) * stride, 0);
    const int bpp = r.channels; // bytes per pixel at depth 8
    for (int y = 0; y < r.height; ++y) {
        const std::uint8_t filter = raw[static_cast<std::size_t>(y) * (stride + 1)];
        const std::uint8_t* src = &raw[static_cast<std::size_t>(y) * (stride + 1) + 1];
        std::uint8_t* cur = &r.samples[static_cast<std::size_t>(y) * stride];
        const std::uint8_t* up = y > 0 ? &r.samples[static_cast<std::size_t>(y - 1) * stride] : nullptr;
        for (std::size_t i = 0; i < stride; ++i) {
            const int a = i >= static_cast<std::size_t>(bpp) ? cur[i - bpp] : 0; // left
            const int b = up ? up[i] : 0;                                        // above
            const int c = (up && i >= static_cast<std::size_t>(bpp)) ? up[i - bpp] : 0;
            int x = src[i];
            switch (filter) {
                case 0: break;
                case 1: x += a; break;
                case 2: x += b; break;
                case 3: x += (a + b) / 2; break;
                case 4: {
                    const int p = a + b - c;
                    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
                    x += (pa <= pb && pa <= pc) ? a : (pb <= pc ? b : c);
                    break;
                }
                default: throw std::runtime_error("png_oracle: bad filter");
            }
            cur[i] = static_cast<std::uint8_t>(x & 0xff);
        }
    }
    return r;
}

} // namespace png_oracle
