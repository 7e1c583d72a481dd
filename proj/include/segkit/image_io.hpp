#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "segkit/core.hpp"

namespace segkit {

namespace detail {

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open file for reading: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad())
        throw IoError("read failure on: " + path);
    return bytes;
}

/// Writes via a temp file in the same directory, renamed into place on
/// success, so a failed write never leaves a partial output.
inline void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("cannot open file for writing: " + tmp);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out)
            throw IoError("write failure on: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw IoError("cannot move " + tmp + " into place: " + ec.message());
    }
}

// ---- PGM (P5, 8-bit) ----

struct PgmHeader {
    int width = 0;
    int height = 0;
    int maxval = 0;
    std::size_t data_offset = 0;
};

inline PgmHeader parse_pgm_header(const std::vector<std::uint8_t>& bytes, const std::string& path) {
    std::size_t pos = 2;  // past "P5"
    auto next_token = [&]() -> long {
        // whitespace and '#' comments separate header tokens
        while (pos < bytes.size()) {
            const char c = static_cast<char>(bytes[pos]);
            if (c == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos;
            } else {
                break;
            }
        }
        if (pos >= bytes.size() || !std::isdigit(bytes[pos]))
            throw FormatError("malformed PGM header in: " + path);
        long v = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            v = v * 10 + (bytes[pos] - '0');
            if (v > 1 << 30)
                throw FormatError("PGM header value out of range in: " + path);
            ++pos;
        }
        return v;
    };

    PgmHeader h;
    h.width = static_cast<int>(next_token());
    h.height = static_cast<int>(next_token());
    h.maxval = static_cast<int>(next_token());
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
        throw FormatError("malformed PGM header in: " + path);
    ++pos;  // single whitespace byte before raster data
    h.data_offset = pos;
    return h;
}

inline GrayImage load_pgm(const std::vector<std::uint8_t>& bytes, const std::string& path) {
    const PgmHeader h = parse_pgm_header(bytes, path);
    if (h.width <= 0 || h.height <= 0)
        throw FormatError("PGM with non-positive dimensions: " + path);
    if (h.maxval != 255)
        throw FormatError("only 8-bit PGM (maxval 255) is supported: " + path);
    const std::size_t n = static_cast<std::size_t>(h.width) * h.height;
    if (bytes.size() - h.data_offset < n)
        throw FormatError("truncated PGM raster data: " + path);
    GrayImage img(h.width, h.height);
    for (std::size_t i = 0; i < n; ++i)
        img.data[i] = bytes[h.data_offset + i] / 255.0;
    return img;
}

// ---- PNG (8-bit grayscale, non-interlaced) ----

inline const std::uint8_t kPngSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

inline std::uint32_t be32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

inline void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

inline int paeth_predictor(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

inline GrayImage load_png(const std::vector<std::uint8_t>& bytes, const std::string& path) {
    std::size_t pos = 8;  // past signature
    int width = 0, height = 0;
    bool have_ihdr = false;
    std::vector<std::uint8_t> idat;

    while (pos + 8 <= bytes.size()) {
        const std::uint32_t len = be32(&bytes[pos]);
        if (pos + 12 + len > bytes.size())
            throw FormatError("truncated PNG chunk in: " + path);
        const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
        const std::uint8_t* payload = &bytes[pos + 8];

        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13)
                throw FormatError("bad PNG IHDR in: " + path);
            width = static_cast<int>(be32(payload));
            height = static_cast<int>(be32(payload + 4));
            const int bit_depth = payload[8];
            const int color_type = payload[9];
            const int interlace = payload[12];
            if (bit_depth != 8 || color_type != 0)
                throw FormatError("only 8-bit grayscale PNG is supported: " + path);
            if (interlace != 0)
                throw FormatError("interlaced PNG is not supported: " + path);
            have_ihdr = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), payload, payload + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }
    if (!have_ihdr || width <= 0 || height <= 0)
        throw FormatError("missing or bad PNG IHDR in: " + path);

    // one filter byte per scanline
    const std::size_t raw_size = static_cast<std::size_t>(height) * (width + 1);
    std::vector<std::uint8_t> raw(raw_size);
    uLongf dest_len = raw_size;
    if (uncompress(raw.data(), &dest_len, idat.data(), idat.size()) != Z_OK || dest_len != raw_size)
        throw FormatError("corrupt PNG pixel data in: " + path);

    GrayImage img(width, height);
    std::vector<std::uint8_t> prev(width, 0), cur(width);
    for (int y = 0; y < height; ++y) {
        const std::uint8_t* line = &raw[static_cast<std::size_t>(y) * (width + 1)];
        const int filter = line[0];
        for (int x = 0; x < width; ++x) {
            const int rx = line[1 + x];
            const int a = x > 0 ? cur[x - 1] : 0;  // left
            const int b = prev[x];                 // up
            const int c = x > 0 ? prev[x - 1] : 0; // up-left
            int v;
            switch (filter) {
                case 0: v = rx; break;
                case 1: v = rx + a; break;
                case 2: v = rx + b; break;
                case 3: v = rx + (a + b) / 2; break;
                case 4: v = rx + paeth_predictor(a, b, c); break;
                default: throw FormatError("unknown PNG filter type in: " + path);
            }
            cur[x] = static_cast<std::uint8_t>(v & 0xff);
            img.at(x, y) = cur[x] / 255.0;
        }
        std::swap(prev, cur);
    }
    return img;
}

inline void append_png_chunk(std::vector<std::uint8_t>& out, const char type[4],
                             const std::uint8_t* payload, std::size_t len) {
    put_be32(out, static_cast<std::uint32_t>(len));
    const std::size_t type_pos = out.size();
    out.insert(out.end(), type, type + 4);
    if (len > 0)
        out.insert(out.end(), payload, payload + len);
    const uLong crc = crc32(crc32(0L, Z_NULL, 0), &out[type_pos], static_cast<uInt>(4 + len));
    put_be32(out, static_cast<std::uint32_t>(crc));
}

inline std::vector<std::uint8_t> encode_png(const std::vector<std::uint8_t>& pixels,
                                            int width, int height) {
    std::vector<std::uint8_t> out(kPngSignature, kPngSignature + 8);

    std::uint8_t ihdr[13];
    ihdr[0] = static_cast<std::uint8_t>(width >> 24);
    ihdr[1] = static_cast<std::uint8_t>(width >> 16);
    ihdr[2] = static_cast<std::uint8_t>(width >> 8);
    ihdr[3] = static_cast<std::uint8_t>(width);
    ihdr[4] = static_cast<std::uint8_t>(height >> 24);
    ihdr[5] = static_cast<std::uint8_t>(height >> 16);
    ihdr[6] = static_cast<std::uint8_t>(height >> 8);
    ihdr[7] = static_cast<std::uint8_t>(height);
    ihdr[8] = 8;   // bit depth
    ihdr[9] = 0;   // grayscale
    ihdr[10] = 0;  // compression
    ihdr[11] = 0;  // filter
    ihdr[12] = 0;  // no interlace
    append_png_chunk(out, "IHDR", ihdr, 13);

    // all scanlines use filter type 0
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(height) * (width + 1));
    for (int y = 0; y < height; ++y) {
        std::uint8_t* line = &raw[static_cast<std::size_t>(y) * (width + 1)];
        line[0] = 0;
        std::memcpy(line + 1, &pixels[static_cast<std::size_t>(y) * width], width);
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()),
                  Z_DEFAULT_COMPRESSION) != Z_OK)
        throw IoError("PNG compression failed");
    append_png_chunk(out, "IDAT", compressed.data(), bound);
    append_png_chunk(out, "IEND", nullptr, 0);
    return out;
}

inline std::vector<std::uint8_t> encode_pgm(const std::vector<std::uint8_t>& pixels,
                                            int width, int height) {
    const std::string header =
        "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), pixels.begin(), pixels.end());
    return out;
}

inline bool has_png_extension(const std::string& path) {
    const auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return false;
    std::string ext = path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return ext == "png";
}

inline void save_bytes_as_image(const std::string& path, const std::vector<std::uint8_t>& pixels,
                                int width, int height) {
    if (has_png_extension(path))
        write_file_bytes(path, encode_png(pixels, width, height));
    else
        write_file_bytes(path, encode_pgm(pixels, width, height));
}

}  // namespace detail

/// Loads an 8-bit binary PGM (P5) or 8-bit grayscale PNG, scaling
/// intensities to [0,1]. The format is detected from the file contents.
inline GrayImage load_image(const std::string& path) {
    const auto bytes = detail::read_file_bytes(path);
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5')
        return detail::load_pgm(bytes, path);
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), detail::kPngSignature, 8) == 0)
        return detail::load_png(bytes, path);
    throw FormatError("unsupported image format: " + path);
}

/// Saves a binary mask as PGM or PNG (by extension; PGM unless ".png"),
/// with 0 -> 0 and 1 -> 255.
inline void save_mask(const BinaryMask& mask, const std::string& path) {
    std::vector<std::uint8_t> pixels(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i)
        pixels[i] = mask.data[i] ? 255 : 0;
    detail::save_bytes_as_image(path, pixels, mask.width, mask.height);
}

/// Saves an intensity image, quantizing [0,1] to 8 bits (round to nearest).
inline void save_image(const GrayImage& img, const std::string& path) {
    std::vector<std::uint8_t> pixels(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) {
        const double v = std::clamp(img.data[i], 0.0, 1.0);
        pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    detail::save_bytes_as_image(path, pixels, img.width, img.height);
}

/// Loads a mask file: pixels at or above mid-gray become 1.
inline BinaryMask load_mask(const std::string& path) {
    const GrayImage img = load_image(path);
    BinaryMask mask(img.width, img.height);
    for (std::size_t i = 0; i < img.size(); ++i)
        mask.data[i] = img.data[i] >= 0.5 ? 1 : 0;
    return mask;
}

}  // namespace segkit
