// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <zlib.h>

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mhpe/common.hpp"

namespace mhpe::img {

/// 8-bit interleaved RGB image, row-major.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;  // 3 * width * height

    Image() = default;
    Image(int w, int h, std::uint8_t fill = 0) : width(w), height(h), rgb(3u * w * h, fill) {}

    std::uint8_t* px(int x, int y) { return rgb.data() + 3 * (static_cast<size_t>(y) * width + x); }
    const std::uint8_t* px(int x, int y) const {
        return rgb.data() + 3 * (static_cast<size_t>(y) * width + x);
    }

    void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        if (x < 0 || y < 0 || x >= width || y >= height) return;
        std::uint8_t* p = px(x, y);
        p[0] = r;
        p[1] = g;
        p[2] = b;
    }
};

namespace detail {

inline void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

inline std::uint32_t read_u32_be(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

inline void write_chunk(std::vector<std::uint8_t>& out, const char type[4],
                        const std::vector<std::uint8_t>& data) {
    put_u32_be(out, static_cast<std::uint32_t>(data.size()));
    const size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const auto crc = crc32(0, out.data() + start, static_cast<uInt>(out.size() - start));
    put_u32_be(out, static_cast<std::uint32_t>(crc));
}

inline int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

}  // namespace detail

/// Encode to PNG bytes (8-bit RGB, filter None, fixed zlib level — output is
/// byte-deterministic for a given image).
inline std::vector<std::uint8_t> encode_png(const Image& im) {
    if (im.width <= 0 || im.height <= 0 || im.rgb.size() != 3u * im.width * im.height) {
        throw ArgumentError("encode_png: empty or inconsistent image");
    }
    const size_t stride = 3u * im.width;
    std::vector<std::uint8_t> raw((stride + 1) * im.height);
    for (int y = 0; y < im.height; ++y) {
        raw[y * (stride + 1)] = 0;  // filter: None
        std::memcpy(raw.data() + y * (stride + 1) + 1, im.rgb.data() + y * stride, stride);
    }
    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> comp(comp_len);
    if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
        throw IoError("encode_png: zlib compression failed");
    }
    comp.resize(comp_len);

    std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    std::vector<std::uint8_t> ihdr;
    detail::put_u32_be(ihdr, static_cast<std::uint32_t>(im.width));
    detail::put_u32_be(ihdr, static_cast<std::uint32_t>(im.height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // color type: truecolor
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    detail::write_chunk(out, "IHDR", ihdr);
    detail::write_chunk(out, "IDAT", comp);
    detail::write_chunk(out, "IEND", {});
    return out;
}

/// Decode a PNG (8-bit RGB or RGBA, non-interlaced; alpha is dropped).
inline Image decode_png(const std::vector<std::uint8_t>& bytes) {
    static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    if (bytes.size() < 8 || std::memcmp(bytes.data(), sig, 8) != 0) {
        throw ParseError("decode_png: bad signature");
    }
    size_t pos = 8;
    int width = 0, height = 0, color_type = -1;
    std::vector<std::uint8_t> idat;
    while (pos + 12 <= bytes.size()) {
        const std::uint32_t len = detail::read_u32_be(bytes.data() + pos);
        if (pos + 12 + len > bytes.size()) throw ParseError("decode_png: truncated chunk");
        const char* type = reinterpret_cast<const char*>(bytes.data() + pos + 4);
        const std::uint8_t* data = bytes.data() + pos + 8;
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw ParseError("decode_png: bad IHDR");
            width = static_cast<int>(detail::read_u32_be(data));
            height = static_cast<int>(detail::read_u32_be(data + 4));
            const int bit_depth = data[8];
            color_type = data[9];
            if (bit_depth != 8 || (color_type != 2 && color_type != 6) || data[12] != 0) {
                throw ParseError("decode_png: unsupported format (need 8-bit RGB/RGBA)");
            }
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }
    if (width <= 0 || height <= 0 || idat.empty()) throw ParseError("decode_png: missing data");

    const int bpp = color_type == 6 ? 4 : 3;
    const size_t stride = static_cast<size_t>(bpp) * width;
    std::vector<std::uint8_t> raw((stride + 1) * height);
    uLongf raw_len = static_cast<uLongf>(raw.size());
    if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        raw_len != raw.size()) {
        throw ParseError("decode_png: zlib inflate failed");
    }

    Image im(width, height);
    std::vector<std::uint8_t> prev(stride, 0), cur(stride);
    for (int y = 0; y < height; ++y) {
        const std::uint8_t filter = raw[y * (stride + 1)];
        const std::uint8_t* src = raw.data() + y * (stride + 1) + 1;
        for (size_t i = 0; i < stride; ++i) {
            const int a = i >= static_cast<size_t>(bpp) ? cur[i - bpp] : 0;
            const int b = prev[i];
            const int c = i >= static_cast<size_t>(bpp) ? prev[i - bpp] : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += detail::paeth(a, b, c); break;
                default: throw ParseError("decode_png: bad filter byte");
            }
            cur[i] = static_cast<std::uint8_t>(v);
        }
        for (int x = 0; x < width; ++x) {
            im.px(x, y)[0] = cur[x * bpp + 0];
            im.px(x, y)[1] = cur[x * bpp + 1];
            im.px(x, y)[2] = cur[x * bpp + 2];
        }
        std::swap(prev, cur);
    }
    return im;
}

inline void write_png(const std::filesystem::path& path, const Image& im) {
    const auto bytes = encode_png(im);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path.string());
}

inline Image read_png(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return decode_png(bytes);
}

/// Fill a triangle with a flat color; pixel centers inside the triangle are
/// painted, later calls overwrite earlier ones.
inline void fill_triangle(Image& im, double x0, double y0, double x1, double y1, double x2,
                          double y2, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const int min_x = std::max(0, static_cast<int>(std::floor(std::min({x0, x1, x2}))));
    const int max_x = std::min(im.width - 1, static_cast<int>(std::ceil(std::max({x0, x1, x2}))));
    const int min_y = std::max(0, static_cast<int>(std::floor(std::min({y0, y1, y2}))));
    const int max_y = std::min(im.height - 1, static_cast<int>(std::ceil(std::max({y0, y1, y2}))));
    const double area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
    if (area == 0.0) return;
    for (int y = min_y; y <= max_y; ++y) {
        for (int x = min_x; x <= max_x; ++x) {
            const double px = x + 0.5, py = y + 0.5;
            const double w0 = (x1 - px) * (y2 - py) - (x2 - px) * (y1 - py);
            const double w1 = (x2 - px) * (y0 - py) - (x0 - px) * (y2 - py);
            const double w2 = (x0 - px) * (y1 - py) - (x1 - px) * (y0 - py);
            const bool inside = area > 0 ? (w0 >= 0 && w1 >= 0 && w2 >= 0)
                                         : (w0 <= 0 && w1 <= 0 && w2 <= 0);
            if (inside) im.set(x, y, r, g, b);
        }
    }
}

}  // namespace mhpe::img
