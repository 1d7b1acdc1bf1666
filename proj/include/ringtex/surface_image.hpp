#pragma once

#include <cstdint>
#include <cstddef>
#include <string>
#include <vector>

#include "ringtex/errors.hpp"

namespace ringtex {

// 8-bit grayscale surface photo, row-major.
struct SurfaceImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;  // row-major, width*height
    double mm_per_pixel = 0.0;         // [mm/px]

    SurfaceImage() = default;
    SurfaceImage(std::size_t w, std::size_t h, std::vector<std::uint8_t> px, double scale)
        : width(w), height(h), pixels(std::move(px)), mm_per_pixel(scale) {
        validate();
    }

    void validate() const {
        if (width < 3 || height < 3) {
            throw ImageFormatError("image must be at least 3x3, got " + std::to_string(width) +
                                   "x" + std::to_string(height));
        }
        if (pixels.size() != width * height) {
            throw ImageFormatError("pixel buffer size mismatch");
        }
        if (!(mm_per_pixel > 0.0)) {
            throw ImageFormatError("mm_per_pixel must be positive");
        }
    }

    std::uint8_t at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
};

// Mean-filtered image. Box averages are generally fractional, so this keeps
// real-valued intensities instead of quantizing back to 8 bits.
struct FilteredImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> pixels;
    double mm_per_pixel = 0.0;

    double at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
};

// One horizontal row of intensities plus the spatial scale it was read at.
struct ScanSignal {
    std::vector<double> intensities;
    double mm_per_pixel = 0.0;
    std::size_t row = 0;
};

// Box average with edge replication, so output size equals input size.
// Separable implementation (horizontal then vertical pass).
inline FilteredImage mean_filter(const SurfaceImage& img, std::size_t kernel_px) {
    img.validate();
    if (kernel_px % 2 == 0 || kernel_px < 1) {
        throw ImageFormatError("kernel must be odd and >= 1, got " + std::to_string(kernel_px));
    }
    if (kernel_px > img.width || kernel_px > img.height) {
        throw ImageFormatError("kernel " + std::to_string(kernel_px) +
                               " exceeds image dimensions");
    }
    const std::size_t w = img.width;
    const std::size_t h = img.height;
    const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(kernel_px / 2);

    auto clampi = [](std::ptrdiff_t v, std::ptrdiff_t lo, std::ptrdiff_t hi) {
        return v < lo ? lo : (v > hi ? hi : v);
    };

    std::vector<double> horiz(w * h);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            double sum = 0.0;
            for (std::ptrdiff_t k = -r; k <= r; ++k) {
                std::ptrdiff_t xi = clampi(static_cast<std::ptrdiff_t>(x) + k, 0,
                                           static_cast<std::ptrdiff_t>(w) - 1);
                sum += img.pixels[y * w + static_cast<std::size_t>(xi)];
            }
            horiz[y * w + x] = sum;
        }
    }
    std::vector<double> out(w * h);
    const double norm = 1.0 / (static_cast<double>(kernel_px) * static_cast<double>(kernel_px));
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            double sum = 0.0;
            for (std::ptrdiff_t k = -r; k <= r; ++k) {
                std::ptrdiff_t yi = clampi(static_cast<std::ptrdiff_t>(y) + k, 0,
                                           static_cast<std::ptrdiff_t>(h) - 1);
                sum += horiz[static_cast<std::size_t>(yi) * w + x];
            }
            out[y * w + x] = sum * norm;
        }
    }
    return FilteredImage{w, h, std::move(out), img.mm_per_pixel};
}

// Mid-height row: floor(height/2).
inline ScanSignal extract_scanline(const FilteredImage& img) {
    const std::size_t row = img.height / 2;
    ScanSignal s;
    s.row = row;
    s.mm_per_pixel = img.mm_per_pixel;
    s.intensities.assign(img.pixels.begin() + static_cast<std::ptrdiff_t>(row * img.width),
                         img.pixels.begin() + static_cast<std::ptrdiff_t>((row + 1) * img.width));
    return s;
}

}  // namespace ringtex
