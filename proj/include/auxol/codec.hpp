#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/evp.h>
#include <png.h>

#include "auxol/grid.hpp"

namespace auxol {

// 8-bit grayscale PNG, both directions, via libpng's simplified API.

inline std::string encode_png_gray(const Grid<std::uint8_t>& pixels) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(pixels.width);
    img.height = static_cast<png_uint_32>(pixels.height);
    img.format = PNG_FORMAT_GRAY;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&img, nullptr, &size, 0, pixels.values.data(), pixels.width, nullptr))
        throw IOFailure(std::string("png encode: ") + img.message);
    std::string out(size, '\0');
    if (!png_image_write_to_memory(&img, out.data(), &size, 0, pixels.values.data(), pixels.width, nullptr))
        throw IOFailure(std::string("png encode: ") + img.message);
    out.resize(size);
    return out;
}

/// Decodes any PNG to 8-bit grayscale.
inline Grid<std::uint8_t> decode_png_gray(std::string_view bytes) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
        throw UnreadableImage(std::string("png decode: ") + img.message);
    img.format = PNG_FORMAT_GRAY;
    Grid<std::uint8_t> out(static_cast<int>(img.width), static_cast<int>(img.height));
    if (!png_image_finish_read(&img, nullptr, out.values.data(), static_cast<png_int_32>(img.width), nullptr)) {
        png_image_free(&img);
        throw UnreadableImage(std::string("png decode: ") + img.message);
    }
    return out;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IOFailure("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IOFailure("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IOFailure("write failed: " + path.string());
}

inline std::string base64_encode(std::string_view bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

inline std::string base64_decode(std::string_view text) {
    std::string clean;
    clean.reserve(text.size());
    for (char ch : text)
        if (ch != '\n' && ch != '\r' && ch != ' ') clean.push_back(ch);
    if (clean.size() % 4 != 0) throw InvalidArgument("base64: length is not a multiple of 4");
    std::string out(3 * clean.size() / 4, '\0');
    const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(clean.data()), static_cast<int>(clean.size()));
    if (n < 0) throw InvalidArgument("base64: invalid input");
    // EVP_DecodeBlock counts padding as zero bytes.
    std::size_t pad = 0;
    if (!clean.empty() && clean.back() == '=') ++pad;
    if (clean.size() > 1 && clean[clean.size() - 2] == '=') ++pad;
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
}

/// Binary mask as base64 PNG with 0/255 pixels.
inline std::string mask_to_png_b64(const Mask& m) {
    Grid<std::uint8_t> px(m.width, m.height);
    for (std::size_t i = 0; i < m.size(); ++i) px.values[i] = m.values[i] ? 255 : 0;
    return base64_encode(encode_png_gray(px));
}

/// Inverse of mask_to_png_b64; foreground iff pixel >= 128.
inline Mask mask_from_png_b64(std::string_view b64) {
    const auto px = decode_png_gray(base64_decode(b64));
    Mask m(px.width, px.height);
    for (std::size_t i = 0; i < px.size(); ++i) m.values[i] = px.values[i] >= 128 ? 1 : 0;
    return m;
}

inline Grid<std::uint8_t> quantize_image(const Image& img) {
    Grid<std::uint8_t> px(img.width, img.height);
    for (std::size_t i = 0; i < img.size(); ++i) {
        const double v = std::clamp(img.values[i], 0.0, 1.0);
        px.values[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    return px;
}

inline Image image_from_pixels(const Grid<std::uint8_t>& px) {
    Image img(px.width, px.height);
    for (std::size_t i = 0; i < px.size(); ++i) img.values[i] = px.values[i] / 255.0;
    return img;
}

inline std::string image_to_png_b64(const Image& img) { return base64_encode(encode_png_gray(quantize_image(img))); }

inline Image image_from_png_b64(std::string_view b64) { return image_from_pixels(decode_png_gray(base64_decode(b64))); }

} // namespace auxol
