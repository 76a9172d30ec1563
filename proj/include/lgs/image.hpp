#pragma once

#include "lgs/core.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace lgs {

// Row-major H x W x C raster of doubles, nominally in [0,1].
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;

    static Image zeros(int w, int h, int c) {
        Image img;
        img.width = w;
        img.height = h;
        img.channels = c;
        img.data.assign(size_t(w) * size_t(h) * size_t(c), 0.0);
        return img;
    }

    static Image constant(int w, int h, int c, double value) {
        Image img = zeros(w, h, c);
        std::fill(img.data.begin(), img.data.end(), value);
        return img;
    }

    double& at(int x, int y, int c) {
        return data[(size_t(y) * size_t(width) + size_t(x)) * size_t(channels) + size_t(c)];
    }
    double at(int x, int y, int c) const {
        return data[(size_t(y) * size_t(width) + size_t(x)) * size_t(channels) + size_t(c)];
    }

    Vec3 rgb(int x, int y) const { return {at(x, y, 0), at(x, y, 1), at(x, y, 2)}; }

    bool same_shape(const Image& other) const {
        return width == other.width && height == other.height && channels == other.channels;
    }
};

inline std::uint8_t quantize8(double v) {
    return std::uint8_t(std::lround(std::min(std::max(v, 0.0), 1.0) * 255.0));
}
inline std::uint16_t quantize16(double v) {
    return std::uint16_t(std::lround(std::min(std::max(v, 0.0), 1.0) * 65535.0));
}

// ---------------------------------------------------------------------------
// Minimal PNG codec (zlib deflate, no interlacing). Writes 8-bit RGB and
// 8/16-bit grayscale; reads back the same plus all five scanline filters.

namespace png {

inline void put_u32be(std::string& out, std::uint32_t v) {
    out.push_back(char((v >> 24) & 0xff));
    out.push_back(char((v >> 16) & 0xff));
    out.push_back(char((v >> 8) & 0xff));
    out.push_back(char(v & 0xff));
}

inline void put_chunk(std::string& out, const char type[4], const std::string& payload) {
    put_u32be(out, std::uint32_t(payload.size()));
    const size_t crc_start = out.size();
    out.append(type, 4);
    out += payload;
    const uLong crc = ::crc32(::crc32(0, nullptr, 0),
                              reinterpret_cast<const Bytef*>(out.data() + crc_start),
                              uInt(out.size() - crc_start));
    put_u32be(out, std::uint32_t(crc));
}

inline std::string encode(const std::vector<std::uint8_t>& raster, int width, int height,
                          int bit_depth, int color_type) {
    const int samples = color_type == 2 ? 3 : 1;
    const size_t row_bytes = size_t(width) * size_t(samples) * size_t(bit_depth / 8);
    std::string filtered;
    filtered.reserve((row_bytes + 1) * size_t(height));
    for (int y = 0; y < height; ++y) {
        filtered.push_back('\0');  // filter type None
        filtered.append(reinterpret_cast<const char*>(raster.data() + size_t(y) * row_bytes),
                        row_bytes);
    }
    uLongf compressed_size = compressBound(uLong(filtered.size()));
    std::string compressed(compressed_size, '\0');
    if (compress2(reinterpret_cast<Bytef*>(compressed.data()), &compressed_size,
                  reinterpret_cast<const Bytef*>(filtered.data()), uLong(filtered.size()),
                  6) != Z_OK)
        throw IoError("png: deflate failed");
    compressed.resize(compressed_size);

    std::string out("\x89PNG\r\n\x1a\n", 8);
    std::string ihdr;
    put_u32be(ihdr, std::uint32_t(width));
    put_u32be(ihdr, std::uint32_t(height));
    ihdr.push_back(char(bit_depth));
    ihdr.push_back(char(color_type));
    ihdr.append(3, '\0');  // compression, filter, interlace
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", compressed);
    put_chunk(out, "IEND", "");
    return out;
}

struct Decoded {
    int width = 0, height = 0, bit_depth = 0, color_type = 0;
    std::vector<std::uint8_t> raster;
};

inline std::uint32_t get_u32be(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) |
           std::uint32_t(p[3]);
}

inline Decoded decode(const std::string& bytes) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(bytes.data());
    if (bytes.size() < 8 || std::memcmp(p, "\x89PNG\r\n\x1a\n", 8) != 0)
        throw IoError("png: bad signature");
    Decoded out;
    std::string idat;
    size_t off = 8;
    bool saw_end = false;
    while (off + 12 <= bytes.size() && !saw_end) {
        const std::uint32_t len = get_u32be(p + off);
        if (off + 12 + len > bytes.size()) throw IoError("png: truncated chunk");
        const char* type = bytes.data() + off + 4;
        const std::uint8_t* payload = p + off + 8;
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw IoError("png: bad IHDR");
            out.width = int(get_u32be(payload));
            out.height = int(get_u32be(payload + 4));
            out.bit_depth = payload[8];
            out.color_type = payload[9];
            if (payload[12] != 0) throw IoError("png: interlaced images are not supported");
            if (!((out.color_type == 0 && (out.bit_depth == 8 || out.bit_depth == 16)) ||
                  (out.color_type == 2 && out.bit_depth == 8)))
                throw IoError("png: unsupported bit depth / color type combination");
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.append(reinterpret_cast<const char*>(payload), len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            saw_end = true;
        }
        off += 12 + len;
    }
    if (out.width <= 0 || out.height <= 0) throw IoError("png: missing IHDR");
    const int samples = out.color_type == 2 ? 3 : 1;
    const size_t bpp = size_t(samples) * size_t(out.bit_depth / 8);  // bytes per pixel
    const size_t row_bytes = size_t(out.width) * bpp;
    const size_t expected = (row_bytes + 1) * size_t(out.height);
    std::vector<std::uint8_t> filtered(expected);
    uLongf dest_len = uLongf(expected);
    if (uncompress(filtered.data(), &dest_len, reinterpret_cast<const Bytef*>(idat.data()),
                   uLong(idat.size())) != Z_OK ||
        dest_len != expected)
        throw IoError("png: inflate failed");

    out.raster.assign(row_bytes * size_t(out.height), 0);
    std::vector<std::uint8_t> prev(row_bytes, 0);
    for (int y = 0; y < out.height; ++y) {
        const std::uint8_t filter = filtered[size_t(y) * (row_bytes + 1)];
        const std::uint8_t* src = filtered.data() + size_t(y) * (row_bytes + 1) + 1;
        std::uint8_t* dst = out.raster.data() + size_t(y) * row_bytes;
        for (size_t i = 0; i < row_bytes; ++i) {
            const int left = i >= bpp ? dst[i - bpp] : 0;
            const int up = prev[i];
            const int up_left = i >= bpp ? prev[i - bpp] : 0;
            int value = src[i];
            switch (filter) {
                case 0: break;
                case 1: value += left; break;
                case 2: value += up; break;
                case 3: value += (left + up) / 2; break;
                case 4: {
                    const int estimate = left + up - up_left;
                    const int pa = std::abs(estimate - left);
                    const int pb = std::abs(estimate - up);
                    const int pc = std::abs(estimate - up_left);
                    value += (pa <= pb && pa <= pc) ? left : (pb <= pc ? up : up_left);
                    break;
                }
                default: throw IoError("png: unknown filter type");
            }
            dst[i] = std::uint8_t(value & 0xff);
        }
        std::memcpy(prev.data(), dst, row_bytes);
    }
    return out;
}

}  // namespace png

// 8-bit RGB PNG (values rounded from [0,1]).
inline void save_png_rgb8(const Image& img, const std::string& path) {
    if (img.channels != 3) throw InvalidConfig("save_png_rgb8 expects a 3-channel image");
    std::vector<std::uint8_t> raster(size_t(img.width) * size_t(img.height) * 3);
    for (size_t i = 0; i < img.data.size(); ++i) raster[i] = quantize8(img.data[i]);
    const std::string bytes = png::encode(raster, img.width, img.height, 8, 2);
    std::ofstream out(path, std::ios::binary);
    if (!out.write(bytes.data(), std::streamsize(bytes.size())))
        throw IoError("cannot write PNG: " + path);
}

// 16-bit grayscale PNG for mattes and depth maps.
inline void save_png_gray16(const Image& img, const std::string& path) {
    if (img.channels != 1) throw InvalidConfig("save_png_gray16 expects a 1-channel image");
    std::vector<std::uint8_t> raster(size_t(img.width) * size_t(img.height) * 2);
    for (size_t i = 0; i < img.data.size(); ++i) {
        const std::uint16_t v = quantize16(img.data[i]);
        raster[2 * i] = std::uint8_t(v >> 8);  // network byte order
        raster[2 * i + 1] = std::uint8_t(v & 0xff);
    }
    const std::string bytes = png::encode(raster, img.width, img.height, 16, 0);
    std::ofstream out(path, std::ios::binary);
    if (!out.write(bytes.data(), std::streamsize(bytes.size())))
        throw IoError("cannot write PNG: " + path);
}

inline Image load_png(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open PNG: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const png::Decoded d = png::decode(bytes);
    const int channels = d.color_type == 2 ? 3 : 1;
    Image img = Image::zeros(d.width, d.height, channels);
    if (d.bit_depth == 8) {
        for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = d.raster[i] / 255.0;
    } else {
        for (size_t i = 0; i < img.data.size(); ++i) {
            const std::uint16_t v =
                std::uint16_t((std::uint16_t(d.raster[2 * i]) << 8) | d.raster[2 * i + 1]);
            img.data[i] = v / 65535.0;
        }
    }
    return img;
}

}  // namespace lgs
