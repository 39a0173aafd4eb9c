#pragma once

// PNG payloads. Encoding is done by hand over zlib so output is
// byte-deterministic and can carry tEXt metadata; decoding goes through
// libpng's simplified API so any valid PNG (palette, gray, 16-bit) loads.

#include "sketch2svg/error.hpp"
#include "sketch2svg/svg_renderer.hpp"

#include <png.h>
#include <zlib.h>

#include <array>
#include <cstdint>
#include <cstring>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace sketch2svg {

using Bytes = std::vector<std::uint8_t>;

namespace detail {

inline constexpr std::array<std::uint8_t, 8> kPngSignature{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

inline void put_u32(Bytes& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

inline void put_chunk(Bytes& out, std::string_view type, const std::uint8_t* data, std::size_t size) {
    put_u32(out, static_cast<std::uint32_t>(size));
    auto start = out.size();
    out.insert(out.end(), type.begin(), type.end());
    out.insert(out.end(), data, data + size);
    auto crc = crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start));
    put_u32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace detail

/// 8-bit RGBA PNG, filter type 0 on every row. `text` entries become tEXt
/// chunks (keyword -> Latin-1 text) in key order.
inline Bytes encode_png(const RasterImage& img, const std::map<std::string, std::string>& text = {}) {
    if (img.empty() || img.pixels.size() != static_cast<std::size_t>(img.width) * img.height * 4) {
        throw Error(ErrorCode::EncodingFailure, "image has no pixels or inconsistent size");
    }
    Bytes out(detail::kPngSignature.begin(), detail::kPngSignature.end());

    Bytes ihdr;
    detail::put_u32(ihdr, static_cast<std::uint32_t>(img.width));
    detail::put_u32(ihdr, static_cast<std::uint32_t>(img.height));
    ihdr.insert(ihdr.end(), {8, 6, 0, 0, 0});
    detail::put_chunk(out, "IHDR", ihdr.data(), ihdr.size());

    for (const auto& [key, value] : text) {
        if (key.empty() || key.size() > 79) throw Error(ErrorCode::EncodingFailure, "bad tEXt keyword");
        Bytes chunk(key.begin(), key.end());
        chunk.push_back(0);
        chunk.insert(chunk.end(), value.begin(), value.end());
        detail::put_chunk(out, "tEXt", chunk.data(), chunk.size());
    }

    const std::size_t stride = static_cast<std::size_t>(img.width) * 4;
    Bytes raw;
    raw.reserve((stride + 1) * img.height);
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0);
        auto row = img.pixels.begin() + static_cast<std::ptrdiff_t>(y * stride);
        raw.insert(raw.end(), row, row + static_cast<std::ptrdiff_t>(stride));
    }
    uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
    Bytes packed(packed_size);
    if (compress2(packed.data(), &packed_size, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
        throw Error(ErrorCode::EncodingFailure, "zlib compression failed");
    }
    detail::put_chunk(out, "IDAT", packed.data(), packed_size);
    detail::put_chunk(out, "IEND", nullptr, 0);
    return out;
}

inline bool looks_like_png(std::string_view bytes) {
    return bytes.size() >= 8 && std::memcmp(bytes.data(), detail::kPngSignature.data(), 8) == 0;
}

/// Decodes any PNG to RGBA8, compositing transparency over white.
inline RasterImage decode_png(std::string_view bytes) {
    if (!looks_like_png(bytes)) throw Error(ErrorCode::InvalidImage, "not a PNG payload");
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        std::string why = image.message;
        png_image_free(&image);
        throw Error(ErrorCode::InvalidImage, "PNG header: " + why);
    }
    image.format = PNG_FORMAT_RGBA;
    RasterImage out;
    out.width = static_cast<int>(image.width);
    out.height = static_cast<int>(image.height);
    out.pixels.resize(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
        std::string why = image.message;
        png_image_free(&image);
        throw Error(ErrorCode::InvalidImage, "PNG data: " + why);
    }
    for (std::size_t i = 0; i < out.pixels.size(); i += 4) {
        unsigned a = out.pixels[i + 3];
        if (a == 255) continue;
        for (int k = 0; k < 3; ++k) {
            out.pixels[i + k] = static_cast<std::uint8_t>((out.pixels[i + k] * a + 255 * (255 - a) + 127) / 255);
        }
        out.pixels[i + 3] = 255;
    }
    return out;
}

inline RasterImage decode_png(const Bytes& bytes) {
    return decode_png(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

/// tEXt chunks of a PNG. Malformed chunk streams yield what was read so far.
inline std::map<std::string, std::string> read_png_text(std::string_view bytes) {
    std::map<std::string, std::string> out;
    if (!looks_like_png(bytes)) return out;
    const auto* data = reinterpret_cast<const std::uint8_t*>(bytes.data());
    std::size_t pos = 8;
    while (pos + 12 <= bytes.size()) {
        std::uint32_t len = detail::get_u32(data + pos);
        if (pos + 12 + len > bytes.size()) break;
        std::string_view type(bytes.data() + pos + 4, 4);
        std::string_view body(bytes.data() + pos + 8, len);
        if (type == "tEXt") {
            auto nul = body.find('\0');
            if (nul != std::string_view::npos) out.emplace(body.substr(0, nul), body.substr(nul + 1));
        }
        if (type == "IEND") break;
        pos += 12 + len;
    }
    return out;
}

inline std::string to_string(const Bytes& bytes) { return {bytes.begin(), bytes.end()}; }

}  // namespace sketch2svg
