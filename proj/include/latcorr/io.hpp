// Copyright (C) 2026 The latcorr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <png.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "latcorr/error.hpp"
#include "latcorr/grid.hpp"

namespace latcorr {

namespace fs = std::filesystem;

// --- little-endian primitives -------------------------------------------------

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_f32(std::vector<std::uint8_t>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

// Sequential reader over a byte span; throws FormatError on truncation.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint8_t u8() {
        need(1);
        return bytes_[pos_++];
    }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }

    float f32() { return std::bit_cast<float>(u32()); }

    std::span<const std::uint8_t> take(std::size_t n) {
        need(n);
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw FormatError("truncated input: need " + std::to_string(n) + " more bytes");
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

// --- tensors ------------------------------------------------------------------

// (C, H, W) header followed by C*H*W little-endian f32 in canonical order.
// Shared by the .lat file body and the wire protocol.
inline void put_tensor(std::vector<std::uint8_t>& out, const LatentGrid& g) {
    put_u32(out, static_cast<std::uint32_t>(g.channels()));
    put_u32(out, static_cast<std::uint32_t>(g.height()));
    put_u32(out, static_cast<std::uint32_t>(g.width()));
    out.reserve(out.size() + 4 * g.size());
    for (double v : g.data()) {
        const float f = static_cast<float>(v);
        if (!std::isfinite(f)) throw NumericError("value " + std::to_string(v) + " does not fit in f32", -1);
        put_f32(out, f);
    }
}

inline LatentGrid read_tensor(ByteReader& in) {
    const std::uint64_t c = in.u32(), h = in.u32(), w = in.u32();
    const std::uint64_t cells = in.remaining() / 4;
    const bool fits = c == 0 || h == 0 || w == 0 || (c <= cells && h <= cells / c && w <= cells / (c * h));
    if (!fits)
        throw FormatError("tensor header claims " + std::to_string(c) + "x" + std::to_string(h) + "x" +
                          std::to_string(w) + " but payload is shorter");
    std::vector<double> data(c * h * w);
    for (auto& v : data) {
        const float f = in.f32();
        if (!std::isfinite(f)) throw FormatError("tensor contains a non-finite value");
        v = f;
    }
    return LatentGrid(c, h, w, std::move(data));
}

inline constexpr std::array<std::uint8_t, 4> kLatMagic{'L', 'A', 'T', '1'};

inline std::vector<std::uint8_t> encode_lat(const LatentGrid& g) {
    std::vector<std::uint8_t> out(kLatMagic.begin(), kLatMagic.end());
    put_tensor(out, g);
    return out;
}

inline LatentGrid decode_lat(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes);
    auto magic = in.take(4);
    if (!std::equal(magic.begin(), magic.end(), kLatMagic.begin())) throw FormatError("not a .lat file (bad magic)");
    LatentGrid g = read_tensor(in);
    if (in.remaining() != 0) throw FormatError(".lat file has trailing bytes");
    return g;
}

inline std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed for " + path.string());
}

inline void write_text_file(const fs::path& path, const std::string& text) {
    write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline LatentGrid read_lat(const fs::path& path) {
    auto bytes = read_file_bytes(path);
    try {
        return decode_lat(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

inline void write_lat(const fs::path& path, const LatentGrid& g) { write_file_bytes(path, encode_lat(g)); }

// --- PNG ----------------------------------------------------------------------

// 8-bit image, interleaved H x W x C (C = 1 gray or 3 RGB) as stored in PNG.
struct Image8 {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> pixels;

    bool operator==(const Image8&) const = default;
};

inline Image8 read_png(const fs::path& path) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str()))
        throw FormatError(path.string() + ": " + img.message);
    const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
    img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    Image8 out{color ? 3u : 1u, img.height, img.width, {}};
    out.pixels.resize(PNG_IMAGE_SIZE(img));
    png_color black{0, 0, 0};
    if (!png_image_finish_read(&img, &black, out.pixels.data(), 0, nullptr)) {
        std::string msg = img.message;
        png_image_free(&img);
        throw FormatError(path.string() + ": " + msg);
    }
    return out;
}

inline void write_png(const fs::path& path, const Image8& im) {
    if (im.channels != 1 && im.channels != 3) throw ParameterError("write_png: only 1 or 3 channels supported");
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(im.width);
    img.height = static_cast<png_uint_32>(im.height);
    img.format = im.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&img, path.c_str(), 0, im.pixels.data(), 0, nullptr))
        throw IoError(path.string() + ": " + img.message);
}

// Masks are single-channel PNG with values {0,255}; on read, any value >= 128
// counts as set (so continuous maps binarize at 0.5).
inline BinaryMask read_mask_png(const fs::path& path) {
    Image8 im = read_png(path);
    if (im.channels != 1) throw FormatError(path.string() + ": mask must be single-channel");
    std::vector<std::uint8_t> bits(im.pixels.size());
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = im.pixels[i] >= 128 ? 1 : 0;
    return BinaryMask(im.height, im.width, std::move(bits));
}

inline void write_mask_png(const fs::path& path, const BinaryMask& m) {
    Image8 im{1, m.height(), m.width(), std::vector<std::uint8_t>(m.bits().size())};
    for (std::size_t i = 0; i < im.pixels.size(); ++i) im.pixels[i] = m.bits()[i] ? 255 : 0;
    write_png(path, im);
}

// Pixel <-> grid mapping used by the identity (toy) codec: [0,255] -> [-1,1].
inline LatentGrid image_to_grid(const Image8& im) {
    LatentGrid g(im.channels, im.height, im.width);
    for (std::size_t y = 0; y < im.height; ++y)
        for (std::size_t x = 0; x < im.width; ++x)
            for (std::size_t c = 0; c < im.channels; ++c)
                g.at(c, y, x) = im.pixels[(y * im.width + x) * im.channels + c] / 127.5 - 1.0;
    return g;
}

inline Image8 grid_to_image(const LatentGrid& g) {
    if (g.channels() != 1 && g.channels() != 3)
        throw ShapeError("grid_to_image: need 1 or 3 channels, got " + std::to_string(g.channels()));
    Image8 im{g.channels(), g.height(), g.width(), std::vector<std::uint8_t>(g.size())};
    for (std::size_t y = 0; y < g.height(); ++y)
        for (std::size_t x = 0; x < g.width(); ++x)
            for (std::size_t c = 0; c < g.channels(); ++c) {
                const double v = std::clamp((g.at(c, y, x) + 1.0) * 127.5, 0.0, 255.0);
                im.pixels[(y * g.width() + x) * g.channels() + c] = static_cast<std::uint8_t>(std::lround(v));
            }
    return im;
}

}  // namespace latcorr
