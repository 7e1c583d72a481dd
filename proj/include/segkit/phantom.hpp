#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <tuple>

#include "segkit/core.hpp"

namespace segkit {

namespace detail {

/// Counter-based generator: every draw is a pure function of (seed, counter),
/// so streams are reproducible regardless of evaluation order.
inline std::uint64_t mix64(std::uint64_t seed, std::uint64_t counter) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (counter + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Uniform draw in (0,1]; never zero, safe under log.
inline double uniform_unit(std::uint64_t seed, std::uint64_t counter) {
    return (static_cast<double>(mix64(seed, counter) >> 11) + 1.0) * 0x1.0p-53;
}

/// Box-Muller pair of independent standard normals for one counter slot.
inline std::pair<double, double> normal_pair(std::uint64_t seed, std::uint64_t counter) {
    const double u1 = uniform_unit(seed, 2 * counter);
    const double u2 = uniform_unit(seed, 2 * counter + 1);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    return {r * std::cos(theta), r * std::sin(theta)};
}

}  // namespace detail

/// Magnitude-domain (Rician) corruption: each pixel becomes the modulus of
/// the signal plus complex Gaussian noise, clipped back into [0,1].
/// sigma = 0 returns the input untouched.
inline GrayImage rician_corrupt(const GrayImage& img, double sigma, std::uint64_t seed) {
    if (sigma < 0.0)
        throw ParameterError("rician_corrupt: sigma must be non-negative");
    if (sigma == 0.0)
        return img;
    GrayImage out(img.width, img.height);
    for (std::size_t i = 0; i < img.size(); ++i) {
        const auto [g1, g2] = detail::normal_pair(seed, i);
        const double re = img.data[i] + sigma * g1;
        const double im = sigma * g2;
        out.data[i] = std::clamp(std::sqrt(re * re + im * im), 0.0, 1.0);
    }
    return out;
}

struct PhantomSpec {
    enum class Shape { disk, square, ellipse };

    int frame_w = 512;
    int frame_h = 512;
    Shape shape = Shape::disk;
    double cx = 256.0;
    double cy = 256.0;
    // disk uses p0; square uses p0 (side); ellipse uses p0/p1 (rx, ry)
    double p0 = 40.0;
    double p1 = 0.0;
    double fg_intensity = 0.7;
    double bg_intensity = 0.2;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;

    static PhantomSpec disk(int w, int h, double cx, double cy, double r) {
        return {w, h, Shape::disk, cx, cy, r, 0.0, 0.7, 0.2, 0.0, 0};
    }
    static PhantomSpec square(int w, int h, double cx, double cy, double side) {
        return {w, h, Shape::square, cx, cy, side, 0.0, 0.7, 0.2, 0.0, 0};
    }
    static PhantomSpec ellipse(int w, int h, double cx, double cy, double rx, double ry) {
        return {w, h, Shape::ellipse, cx, cy, rx, ry, 0.7, 0.2, 0.0, 0};
    }
};

namespace detail {

inline bool phantom_contains(const PhantomSpec& spec, int x, int y) {
    const double dx = x - spec.cx;
    const double dy = y - spec.cy;
    switch (spec.shape) {
        case PhantomSpec::Shape::disk:
            return dx * dx + dy * dy <= spec.p0 * spec.p0;
        case PhantomSpec::Shape::square:
            return std::abs(dx) <= spec.p0 / 2.0 && std::abs(dy) <= spec.p0 / 2.0;
        case PhantomSpec::Shape::ellipse: {
            const double nx = dx / spec.p0;
            const double ny = dy / spec.p1;
            return nx * nx + ny * ny <= 1.0;
        }
    }
    return false;
}

inline void validate_phantom(const PhantomSpec& spec) {
    if (spec.frame_w <= 0 || spec.frame_h <= 0)
        throw ParameterError("phantom: frame dimensions must be positive");
    double ex = 0.0, ey = 0.0;  // shape half-extents
    switch (spec.shape) {
        case PhantomSpec::Shape::disk: ex = ey = spec.p0; break;
        case PhantomSpec::Shape::square: ex = ey = spec.p0 / 2.0; break;
        case PhantomSpec::Shape::ellipse: ex = spec.p0; ey = spec.p1; break;
    }
    if (ex <= 0.0 || ey <= 0.0)
        throw ParameterError("phantom: shape size must be positive");
    if (spec.cx - ex < 0.0 || spec.cx + ex > spec.frame_w - 1 ||
        spec.cy - ey < 0.0 || spec.cy + ey > spec.frame_h - 1)
        throw ParameterError("phantom: shape does not fit inside the frame");
    if (spec.fg_intensity < 0.0 || spec.fg_intensity > 1.0 ||
        spec.bg_intensity < 0.0 || spec.bg_intensity > 1.0)
        throw ParameterError("phantom: intensities must lie in [0,1]");
    if (spec.noise_sigma < 0.0)
        throw ParameterError("phantom: noise sigma must be non-negative");
}

}  // namespace detail

struct PhantomResult {
    GrayImage image;
    BinaryMask mask;
    BoundingBox bbox;
};

/// Rasterizes the shape exactly, builds the two-level image, applies Rician
/// noise, and returns the tight bounding box of the mask. Deterministic for
/// a given spec and seed.
inline PhantomResult generate(const PhantomSpec& spec) {
    detail::validate_phantom(spec);

    BinaryMask mask(spec.frame_w, spec.frame_h);
    GrayImage clean(spec.frame_w, spec.frame_h, spec.bg_intensity);
    int min_x = std::numeric_limits<int>::max(), max_x = -1;
    int min_y = std::numeric_limits<int>::max(), max_y = -1;
    for (int y = 0; y < spec.frame_h; ++y) {
        for (int x = 0; x < spec.frame_w; ++x) {
            if (detail::phantom_contains(spec, x, y)) {
                mask.at(x, y) = 1;
                clean.at(x, y) = spec.fg_intensity;
                min_x = std::min(min_x, x);
                max_x = std::max(max_x, x);
                min_y = std::min(min_y, y);
                max_y = std::max(max_y, y);
            }
        }
    }
    if (max_x < 0)
        throw ParameterError("phantom: shape rasterized to an empty mask");

    PhantomResult result;
    result.image = rician_corrupt(clean, spec.noise_sigma, spec.seed);
    result.mask = std::move(mask);
    result.bbox = BoundingBox{min_x, min_y, max_x - min_x + 1, max_y - min_y + 1,
                              Frame::of_size(spec.frame_w, spec.frame_h)};
    return result;
}

}  // namespace segkit
