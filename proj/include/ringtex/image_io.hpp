#pragma once

#include <png.h>

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ringtex/csv.hpp"
#include "ringtex/errors.hpp"
#include "ringtex/surface_image.hpp"

namespace ringtex {

namespace detail {

// P5 header tokens are separated by whitespace; '#' starts a comment to EOL.
inline std::size_t pgm_token(const std::string& data, std::size_t pos, unsigned long& out,
                             const std::string& context) {
    while (pos < data.size()) {
        if (std::isspace(static_cast<unsigned char>(data[pos]))) {
            ++pos;
        } else if (data[pos] == '#') {
            while (pos < data.size() && data[pos] != '\n') ++pos;
        } else {
            break;
        }
    }
    std::size_t start = pos;
    while (pos < data.size() && std::isdigit(static_cast<unsigned char>(data[pos]))) ++pos;
    if (pos == start) {
        throw ImageFormatError("malformed PGM header in " + context);
    }
    out = std::stoul(data.substr(start, pos - start));
    return pos;
}

}  // namespace detail

inline SurfaceImage load_pgm(const std::filesystem::path& path, double mm_per_pixel) {
    const std::string data = read_file(path);
    const std::string context = path.string();
    if (data.size() < 2 || data[0] != 'P' || data[1] != '5') {
        throw ImageFormatError("not a binary PGM (P5): " + context);
    }
    unsigned long w = 0, h = 0, maxval = 0;
    std::size_t pos = 2;
    pos = detail::pgm_token(data, pos, w, context);
    pos = detail::pgm_token(data, pos, h, context);
    pos = detail::pgm_token(data, pos, maxval, context);
    if (maxval > 255) {
        throw BitDepthError("PGM maxval " + std::to_string(maxval) + " implies 16-bit samples: " +
                            context);
    }
    if (maxval == 0) {
        throw ImageFormatError("PGM maxval 0: " + context);
    }
    // Exactly one whitespace byte separates the header from the raster.
    if (pos >= data.size() || !std::isspace(static_cast<unsigned char>(data[pos]))) {
        throw ImageFormatError("malformed PGM header in " + context);
    }
    ++pos;
    const std::size_t need = static_cast<std::size_t>(w) * h;
    if (data.size() - pos < need) {
        throw ImageFormatError("PGM raster truncated: " + context);
    }
    std::vector<std::uint8_t> px(need);
    for (std::size_t i = 0; i < need; ++i) {
        px[i] = static_cast<std::uint8_t>(data[pos + i]);
    }
    return SurfaceImage(w, h, std::move(px), mm_per_pixel);
}

inline void save_pgm(const std::filesystem::path& path, const SurfaceImage& img) {
    img.validate();
    std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                      "\n255\n";
    out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
    write_file_atomic(path, out);
}

inline SurfaceImage load_png_gray(const std::filesystem::path& path, double mm_per_pixel) {
    const std::string data = read_file(path);
    const std::string context = path.string();
    if (data.size() < 33 ||
        png_sig_cmp(reinterpret_cast<png_const_bytep>(data.data()), 0, 8) != 0) {
        throw ImageFormatError("not a PNG: " + context);
    }
    // IHDR is the first chunk; its bit-depth byte sits at offset 24.
    const int bit_depth = static_cast<unsigned char>(data[24]);
    if (bit_depth != 8) {
        throw BitDepthError("PNG bit depth " + std::to_string(bit_depth) + ", expected 8: " +
                            context);
    }
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, data.data(), data.size())) {
        throw ImageFormatError(std::string("PNG read failed: ") + image.message + ": " + context);
    }
    // Color inputs are reduced to luminance by libpng's grayscale conversion.
    image.format = PNG_FORMAT_GRAY;
    std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, px.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        throw ImageFormatError("PNG decode failed: " + msg + ": " + context);
    }
    return SurfaceImage(image.width, image.height, std::move(px), mm_per_pixel);
}

// Dispatch on content (magic bytes), not extension.
inline SurfaceImage load_surface_image(const std::filesystem::path& path, double mm_per_pixel) {
    const std::string head = [&] {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw MissingFileError("cannot open " + path.string());
        char buf[8] = {};
        in.read(buf, 8);
        return std::string(buf, static_cast<std::size_t>(in.gcount()));
    }();
    if (head.size() >= 2 && head[0] == 'P' && head[1] == '5') {
        return load_pgm(path, mm_per_pixel);
    }
    if (head.size() >= 8 &&
        png_sig_cmp(reinterpret_cast<png_const_bytep>(head.data()), 0, 8) == 0) {
        return load_png_gray(path, mm_per_pixel);
    }
    throw ImageFormatError("unrecognized image format (need 8-bit PNG or P5 PGM): " +
                           path.string());
}

}  // namespace ringtex
