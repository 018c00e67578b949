#pragma once

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace put {

namespace detail {

inline void png_append(png_structp png, png_bytep data, png_size_t len) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + len);
}

inline void png_error_throw(png_structp, png_const_charp msg) { throw std::runtime_error(std::string("png: ") + msg); }
inline void png_warning_ignore(png_structp, png_const_charp) {}

} // namespace detail

/// Encodes row-major samples as PNG. `channels` is 1 (gray), 3 (RGB) or 4 (RGBA); `bit_depth` 8 or 16.
/// 16-bit samples are passed native-endian and written big-endian as PNG requires.
inline std::vector<std::uint8_t> encode_png(int width, int height, int channels, int bit_depth,
                                            const void* samples) {
    if (channels != 1 && channels != 3 && channels != 4) throw std::invalid_argument("png: unsupported channel count");
    if (bit_depth != 8 && bit_depth != 16) throw std::invalid_argument("png: unsupported bit depth");
    std::vector<std::uint8_t> out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::png_error_throw,
                                              detail::png_warning_ignore);
    if (!png) throw std::runtime_error("png: cannot create write struct");
    png_infop info = png_create_info_struct(png);
    const int color_type = channels == 1 ? PNG_COLOR_TYPE_GRAY
                           : channels == 3 ? PNG_COLOR_TYPE_RGB
                                           : PNG_COLOR_TYPE_RGB_ALPHA;
    const std::size_t bytes_per_sample = bit_depth / 8;
    const std::size_t stride = static_cast<std::size_t>(width) * channels * bytes_per_sample;
    std::vector<std::uint8_t> row(stride);
    try {
        png_set_write_fn(png, &out, detail::png_append, nullptr);
        png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
                     PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        const auto* src = static_cast<const std::uint8_t*>(samples);
        for (int y = 0; y < height; ++y) {
            if (bit_depth == 8) {
                png_write_row(png, src + y * stride);
            } else {
                const auto* s16 = reinterpret_cast<const std::uint16_t*>(src + y * stride);
                for (std::size_t i = 0; i < stride / 2; ++i) {
                    row[2 * i] = static_cast<std::uint8_t>(s16[i] >> 8);
                    row[2 * i + 1] = static_cast<std::uint8_t>(s16[i] & 0xff);
                }
                png_write_row(png, row.data());
            }
        }
        png_write_end(png, nullptr);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
    png_destroy_write_struct(&png, &info);
    return out;
}

inline void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

inline void write_file(const std::string& path, const std::string& text) {
    write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

inline std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

struct DecodedPng {
    int width = 0, height = 0, channels = 0;
    std::vector<std::uint8_t> bytes;
};

/// Decodes to 8 bits per sample, keeping the file's channel layout (gray, RGB or RGBA).
inline DecodedPng decode_png8(const std::vector<std::uint8_t>& data) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, data.data(), data.size()))
        throw std::runtime_error(std::string("png: ") + image.message);
    image.format &= ~(PNG_FORMAT_FLAG_LINEAR | PNG_FORMAT_FLAG_COLORMAP);
    DecodedPng out;
    out.width = static_cast<int>(image.width);
    out.height = static_cast<int>(image.height);
    out.channels = static_cast<int>(PNG_IMAGE_SAMPLE_CHANNELS(image.format));
    out.bytes.resize(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, out.bytes.data(), 0, nullptr)) {
        png_image_free(&image);
        throw std::runtime_error(std::string("png: ") + image.message);
    }
    return out;
}

} // namespace put
