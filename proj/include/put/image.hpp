#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace put {

/// Row-major interleaved image. Pixel (x, y) channel c lives at ((y * width) + x) * channels + c.
template <typename T>
class Image {
public:
    Image() = default;
    Image(int width, int height, int channels, T fill = T{})
        : width_(width), height_(height), channels_(channels),
          data_(static_cast<std::size_t>(width) * height * channels, fill) {
        if (width < 0 || height < 0 || channels < 1)
            throw std::invalid_argument("invalid image dimensions");
    }

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
    bool empty() const { return data_.empty(); }

    T& at(int x, int y, int c = 0) {
        assert(x >= 0 && x < width_ && y >= 0 && y < height_ && c >= 0 && c < channels_);
        return data_[index(x, y, c)];
    }
    const T& at(int x, int y, int c = 0) const {
        assert(x >= 0 && x < width_ && y >= 0 && y < height_ && c >= 0 && c < channels_);
        return data_[index(x, y, c)];
    }

    T* row(int y) { return data_.data() + static_cast<std::size_t>(y) * width_ * channels_; }
    const T* row(int y) const { return data_.data() + static_cast<std::size_t>(y) * width_ * channels_; }

    std::vector<T>& data() { return data_; }
    const std::vector<T>& data() const { return data_; }

    bool same_shape(const Image& o) const {
        return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
    }

    friend bool operator==(const Image&, const Image&) = default;

private:
    std::size_t index(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }

    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<T> data_;
};

using ImageF = Image<float>;
using Image8 = Image<std::uint8_t>;

inline std::uint8_t to_byte(float v) {
    if (!(v > 0.0f)) return 0;
    if (v >= 1.0f) return 255;
    return static_cast<std::uint8_t>(v * 255.0f + 0.5f);
}

inline float from_byte(std::uint8_t b) { return static_cast<float>(b) / 255.0f; }

inline Image8 quantize(const ImageF& img) {
    Image8 out(img.width(), img.height(), img.channels());
    for (std::size_t i = 0; i < img.data().size(); ++i) out.data()[i] = to_byte(img.data()[i]);
    return out;
}

inline ImageF dequantize(const Image8& img) {
    ImageF out(img.width(), img.height(), img.channels());
    for (std::size_t i = 0; i < img.data().size(); ++i) out.data()[i] = from_byte(img.data()[i]);
    return out;
}

inline void require_same_size(const auto& a, const auto& b, const char* what) {
    if (a.width() != b.width() || a.height() != b.height())
        throw std::invalid_argument(std::string(what) + ": image dimensions differ (" +
                                    std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                                    " vs " + std::to_string(b.width()) + "x" +
                                    std::to_string(b.height()) + ")");
}

} // namespace put
