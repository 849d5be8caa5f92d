#include "affect/core/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <csetjmp>

#include <jerror.h>
#include <jpeglib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>

namespace affect::core {

namespace {

std::vector<std::uint8_t> read_all(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_image: cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (bytes.empty()) throw std::runtime_error("load_image: empty file " + path);
    return bytes;
}

struct PngReadState {
    const std::uint8_t* data;
    std::size_t size;
    std::size_t pos;
};

void png_mem_read(png_structp png, png_bytep out, png_size_t len) {
    auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
    if (st->pos + len > st->size) png_error(png, "truncated png stream");
    std::memcpy(out, st->data + st->pos, len);
    st->pos += len;
}

Image decode_png(const std::vector<std::uint8_t>& bytes, const std::string& path) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("load_image: png init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("load_image: png init failed");
    }
    std::vector<std::vector<png_byte>> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("load_image: undecodable PNG payload: " + path);
    }
    PngReadState st{bytes.data(), bytes.size(), 0};
    png_set_read_fn(png, &st, png_mem_read);
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    if (bit_depth == 16) png_set_swap(png); // read native little-endian below
    png_read_update_info(png, info);

    const int channels = png_get_channels(png, info);
    const int depth = png_get_bit_depth(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    rows.assign(h, std::vector<png_byte>(rowbytes));
    std::vector<png_bytep> row_ptrs(h);
    for (png_uint_32 y = 0; y < h; ++y) row_ptrs[y] = rows[y].data();
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    if (channels != 1 && channels != 3)
        throw std::runtime_error("load_image: unsupported channel count " +
                                 std::to_string(channels) + " in " + path);

    const ColorSpace cs = channels == 1 ? ColorSpace::GRAY : ColorSpace::RGB;
    Image img(static_cast<int>(h), static_cast<int>(w), channels, cs);
    const double scale = depth == 16 ? 1.0 / 65535.0 : 1.0 / 255.0;
    for (png_uint_32 y = 0; y < h; ++y) {
        const png_byte* row = rows[y].data();
        for (png_uint_32 x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c) {
                double v;
                if (depth == 16) {
                    const std::size_t i = 2 * (x * channels + c);
                    v = (row[i] | (row[i + 1] << 8)) * scale;
                } else {
                    v = row[x * static_cast<png_uint_32>(channels) + c] * scale;
                }
                img.at(c, static_cast<int>(y), static_cast<int>(x)) = v;
            }
    }
    return img;
}

struct JpegErrorMgr {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    std::longjmp(err->jump, 1);
}

Image decode_jpeg(const std::vector<std::uint8_t>& bytes, const std::string& path) {
    jpeg_decompress_struct cinfo;
    JpegErrorMgr jerr;
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = jpeg_error_exit;
    if (setjmp(jerr.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw std::runtime_error("load_image: undecodable JPEG payload: " + path);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_start_decompress(&cinfo);

    const int w = static_cast<int>(cinfo.output_width);
    const int h = static_cast<int>(cinfo.output_height);
    const int channels = cinfo.output_components;
    if (channels != 1 && channels != 3) {
        jpeg_destroy_decompress(&cinfo);
        throw std::runtime_error("load_image: unsupported channel count in " + path);
    }
    const ColorSpace cs = channels == 1 ? ColorSpace::GRAY : ColorSpace::RGB;
    Image img(h, w, channels, cs);
    std::vector<JSAMPLE> row(static_cast<std::size_t>(w) * channels);
    JSAMPROW row_ptr = row.data();
    int y = 0;
    while (cinfo.output_scanline < cinfo.output_height) {
        jpeg_read_scanlines(&cinfo, &row_ptr, 1);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c)
                img.at(c, y, x) = row[static_cast<std::size_t>(x) * channels + c] / 255.0;
        ++y;
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return img;
}

} // namespace

Image load_image(const std::string& path) {
    const auto bytes = read_all(path);
    static const std::uint8_t png_sig[4] = {0x89, 'P', 'N', 'G'};
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), png_sig, 4) == 0)
        return decode_png(bytes, path);
    if (bytes.size() >= 2 && bytes[0] == 0xFF && bytes[1] == 0xD8)
        return decode_jpeg(bytes, path);
    throw std::runtime_error("load_image: unrecognized format: " + path);
}

std::vector<std::uint8_t> quantize8(const Image& img) {
    std::vector<std::uint8_t> out;
    out.reserve(static_cast<std::size_t>(img.height()) * img.width() * img.channels());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < img.channels(); ++c) {
                const double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
                out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
            }
    return out;
}

void save_png(const Image& img, const std::string& path) {
    if (img.color_space == ColorSpace::HSV)
        throw std::invalid_argument("save_png: convert HSV to RGB before saving");
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw std::runtime_error("save_png: cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        std::fclose(fp);
        throw std::runtime_error("save_png: init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw std::runtime_error("save_png: write failed: " + path);
    }
    png_init_io(png, fp);
    const int color = img.channels() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()),
                 static_cast<png_uint_32>(img.height()), 8, color, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    const auto bytes = quantize8(img);
    const std::size_t stride = static_cast<std::size_t>(img.width()) * img.channels();
    for (int y = 0; y < img.height(); ++y)
        png_write_row(png, const_cast<png_bytep>(bytes.data() + static_cast<std::size_t>(y) * stride));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

} // namespace affect::core
