#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "segkit/core.hpp"

namespace segkit {

namespace detail {

/// 8-bit histogram bin of an intensity in [0,1], round to nearest.
inline int intensity_bin(double v) {
    const long b = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
    return static_cast<int>(std::clamp(b, 0L, 255L));
}

/// Percentile by linear interpolation over the sorted values
/// (rank = pct/100 * (n-1)).
inline double percentile(std::vector<double> sorted, double pct) {
    const double rank = pct / 100.0 * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double f = rank - static_cast<double>(lo);
    return sorted[lo] * (1.0 - f) + sorted[hi] * f;
}

inline int round_half_up(double v) {
    return static_cast<int>(std::floor(v + 0.5));
}

}  // namespace detail

/// Linear stretch so the minimum maps to 0 and the maximum to 1.
/// A constant image maps to all zeros.
inline GrayImage normalize(const GrayImage& img) {
    if (img.empty())
        throw ParameterError("normalize: empty image");
    const auto [lo_it, hi_it] = std::minmax_element(img.data.begin(), img.data.end());
    const double lo = *lo_it, hi = *hi_it;
    GrayImage out(img.width, img.height);
    if (hi == lo)
        return out;
    for (std::size_t i = 0; i < img.size(); ++i)
        out.data[i] = (img.data[i] - lo) / (hi - lo);
    return out;
}

/// Histogram equalization over 256 bins: each pixel maps to the cumulative
/// frequency of its bin. Monotone in pixel rank; a constant image maps to
/// all ones (the CDF of the sole occupied bin).
inline GrayImage histogram_equalize(const GrayImage& img) {
    if (img.empty())
        throw ParameterError("histogram_equalize: empty image");
    std::array<std::size_t, 256> hist{};
    for (double v : img.data)
        ++hist[detail::intensity_bin(v)];
    std::array<double, 256> cdf{};
    std::size_t running = 0;
    for (int b = 0; b < 256; ++b) {
        running += hist[b];
        cdf[b] = static_cast<double>(running) / static_cast<double>(img.size());
    }
    GrayImage out(img.width, img.height);
    for (std::size_t i = 0; i < img.size(); ++i)
        out.data[i] = cdf[detail::intensity_bin(img.data[i])];
    return out;
}

/// Clips at the lo/hi percentile intensities, then maps the clipped range
/// linearly to [0,1]. Shares normalize's all-zero convention when the
/// percentile range is degenerate.
inline GrayImage contrast_stretch(const GrayImage& img, double lo_pct, double hi_pct) {
    if (img.empty())
        throw ParameterError("contrast_stretch: empty image");
    if (lo_pct < 0.0 || hi_pct > 100.0 || lo_pct >= hi_pct)
        throw ParameterError("contrast_stretch: need 0 <= lo_pct < hi_pct <= 100");
    std::vector<double> sorted(img.data);
    std::sort(sorted.begin(), sorted.end());
    const double lo = detail::percentile(sorted, lo_pct);
    const double hi = detail::percentile(std::move(sorted), hi_pct);
    GrayImage out(img.width, img.height);
    if (hi == lo)
        return out;
    for (std::size_t i = 0; i < img.size(); ++i) {
        const double v = std::clamp(img.data[i], lo, hi);
        out.data[i] = (v - lo) / (hi - lo);
    }
    return out;
}

enum class Interp { bilinear, nearest };

/// Resample to new dimensions. Bilinear (corner-aligned) suits intensity
/// images; nearest keeps masks binary.
inline GrayImage resize(const GrayImage& img, int new_w, int new_h, Interp mode) {
    if (img.empty())
        throw ParameterError("resize: empty image");
    if (new_w <= 0 || new_h <= 0)
        throw ParameterError("resize: target dimensions must be positive");

    // corner-aligned source coordinate; a single-pixel axis samples its center
    auto src_coord = [](int dst, int dst_n, int src_n) -> double {
        if (dst_n == 1) return (src_n - 1) / 2.0;
        return static_cast<double>(dst) * (src_n - 1) / (dst_n - 1);
    };

    GrayImage out(new_w, new_h);
    for (int y = 0; y < new_h; ++y) {
        const double sy = src_coord(y, new_h, img.height);
        for (int x = 0; x < new_w; ++x) {
            const double sx = src_coord(x, new_w, img.width);
            if (mode == Interp::nearest) {
                out.at(x, y) = img.at(detail::round_half_up(sx), detail::round_half_up(sy));
            } else {
                const int x0 = static_cast<int>(std::floor(sx));
                const int y0 = static_cast<int>(std::floor(sy));
                const int x1 = std::min(x0 + 1, img.width - 1);
                const int y1 = std::min(y0 + 1, img.height - 1);
                const double fx = sx - x0;
                const double fy = sy - y0;
                const double top = img.at(x0, y0) * (1.0 - fx) + img.at(x1, y0) * fx;
                const double bot = img.at(x0, y1) * (1.0 - fx) + img.at(x1, y1) * fx;
                out.at(x, y) = top * (1.0 - fy) + bot * fy;
            }
        }
    }
    return out;
}

inline BinaryMask resize_mask(const BinaryMask& mask, int new_w, int new_h) {
    GrayImage img(mask.width, mask.height);
    for (std::size_t i = 0; i < mask.size(); ++i)
        img.data[i] = mask.data[i] ? 1.0 : 0.0;
    const GrayImage resized = resize(img, new_w, new_h, Interp::nearest);
    BinaryMask out(new_w, new_h);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data[i] = resized.data[i] > 0.5 ? 1 : 0;
    return out;
}

/// Rescales a box between coordinate frames (round half up), clamping the
/// result inside the target frame.
inline BoundingBox map_bbox(const BoundingBox& box, const Frame& from, const Frame& to) {
    if (box.frame != from)
        throw ParameterError("map_bbox: box does not carry the source frame");
    box.require_valid();
    const double sx = static_cast<double>(to.width) / from.width;
    const double sy = static_cast<double>(to.height) / from.height;

    BoundingBox out;
    out.frame = to;
    out.x = detail::round_half_up(box.x * sx);
    out.y = detail::round_half_up(box.y * sy);
    out.w = detail::round_half_up(box.w * sx);
    out.h = detail::round_half_up(box.h * sy);

    out.x = std::clamp(out.x, 0, to.width - 1);
    out.y = std::clamp(out.y, 0, to.height - 1);
    out.w = std::clamp(out.w, 1, to.width - out.x);
    out.h = std::clamp(out.h, 1, to.height - out.y);
    return out;
}

}  // namespace segkit
