#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <vector>

#include "segkit/core.hpp"
#include "segkit/acwe.hpp"

namespace segkit {
namespace edge {

enum class Operator { prewitt, sobel };

struct EdgeParams {
    Operator op = Operator::prewitt;
    bool otsu = true;           // otherwise `threshold` is used directly
    double threshold = 0.5;     // fixed threshold on the gradient magnitude
    int closing_radius = 2;

    void require_valid() const {
        if (!otsu && (threshold < 0.0 || threshold > 1.0))
            throw ParameterError("edge: fixed threshold must lie in [0,1]");
        if (closing_radius < 0)
            throw ParameterError("edge: closing radius must be non-negative");
    }
};

/// sqrt(Gx^2 + Gy^2) with 3x3 Prewitt or Sobel kernels, borders handled by
/// edge replication, rescaled to [0,1] by the maximum response.
inline GrayImage gradient_magnitude(const GrayImage& img, Operator op) {
    if (img.width < 3 || img.height < 3)
        throw ParameterError("gradient_magnitude: image must be at least 3x3");
    const double c = op == Operator::sobel ? 2.0 : 1.0;
    // Gx: [-1 0 1; -c 0 c; -1 0 1], Gy is its transpose pattern
    GrayImage out(img.width, img.height);
    double max_mag = 0.0;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            auto sample = [&](int dx, int dy) {
                const int sx = std::clamp(x + dx, 0, img.width - 1);
                const int sy = std::clamp(y + dy, 0, img.height - 1);
                return img.at(sx, sy);
            };
            // grouped as column/row sums so flat regions cancel exactly
            const double gx = (sample(1, -1) + c * sample(1, 0) + sample(1, 1)) -
                              (sample(-1, -1) + c * sample(-1, 0) + sample(-1, 1));
            const double gy = (sample(-1, 1) + c * sample(0, 1) + sample(1, 1)) -
                              (sample(-1, -1) + c * sample(0, -1) + sample(1, -1));
            const double mag = std::sqrt(gx * gx + gy * gy);
            out.at(x, y) = mag;
            max_mag = std::max(max_mag, mag);
        }
    }
    if (max_mag > 0.0)
        for (double& v : out.data)
            v /= max_mag;
    return out;
}

/// Otsu's threshold over 256 bins: maximizes the between-class variance,
/// ties broken toward the lower threshold. The returned intensity sits on
/// the boundary between the two bin classes, so pixels binarize as
/// value > threshold. A degenerate (single-bin) image yields 0.
inline double otsu_threshold(const GrayImage& img) {
    if (img.empty())
        throw ParameterError("otsu_threshold: empty image");
    std::array<std::uint64_t, 256> hist{};
    for (double v : img.data)
        ++hist[segkit::detail::intensity_bin(v)];

    const double n = static_cast<double>(img.size());
    double total_sum = 0.0;
    for (int b = 0; b < 256; ++b)
        total_sum += static_cast<double>(b) * static_cast<double>(hist[b]);

    int best_k = 0;
    double best_var = -1.0;
    double w0 = 0.0, sum0 = 0.0;
    for (int k = 0; k < 256; ++k) {
        w0 += static_cast<double>(hist[k]);
        sum0 += static_cast<double>(k) * static_cast<double>(hist[k]);
        const double w1 = n - w0;
        if (w0 == 0.0 || w1 == 0.0) continue;
        const double mu0 = sum0 / w0;
        const double mu1 = (total_sum - sum0) / w1;
        const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if (between > best_var) {
            best_var = between;
            best_k = k;
        }
    }
    return best_var < 0.0 ? 0.0 : (best_k + 0.5) / 255.0;
}

namespace detail {

inline std::vector<std::array<int, 2>> disk_offsets(int radius) {
    std::vector<std::array<int, 2>> offsets;
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
            if (dx * dx + dy * dy <= radius * radius)
                offsets.push_back({dx, dy});
    return offsets;
}

inline BinaryMask dilate(const BinaryMask& mask, const std::vector<std::array<int, 2>>& se) {
    BinaryMask out(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) {
            std::uint8_t v = 0;
            for (const auto& d : se) {
                const int nx = x + d[0], ny = y + d[1];
                if (mask.in_bounds(nx, ny) && mask.at(nx, ny)) { v = 1; break; }
            }
            out.at(x, y) = v;
        }
    return out;
}

inline BinaryMask erode(const BinaryMask& mask, const std::vector<std::array<int, 2>>& se) {
    BinaryMask out(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) {
            std::uint8_t v = 1;
            for (const auto& d : se) {
                const int nx = x + d[0], ny = y + d[1];
                // out-of-frame cells do not veto
                if (mask.in_bounds(nx, ny) && !mask.at(nx, ny)) { v = 0; break; }
            }
            out.at(x, y) = v;
        }
    return out;
}

inline BinaryMask closing(const BinaryMask& mask, int radius) {
    if (radius <= 0)
        return mask;
    const auto se = disk_offsets(radius);
    return erode(dilate(mask, se), se);
}

/// 4-connected flood fill over {mask == value} from a seed; returns the
/// filled component as a mask.
inline BinaryMask flood_fill(const BinaryMask& mask, int seed_x, int seed_y, std::uint8_t value) {
    BinaryMask out(mask.width, mask.height);
    if (!mask.in_bounds(seed_x, seed_y) || mask.at(seed_x, seed_y) != value)
        return out;
    std::queue<std::pair<int, int>> frontier;
    frontier.emplace(seed_x, seed_y);
    out.at(seed_x, seed_y) = 1;
    const int dx[4] = {1, -1, 0, 0};
    const int dy[4] = {0, 0, 1, -1};
    while (!frontier.empty()) {
        const auto [cx, cy] = frontier.front();
        frontier.pop();
        for (int k = 0; k < 4; ++k) {
            const int nx = cx + dx[k], ny = cy + dy[k];
            if (mask.in_bounds(nx, ny) && !out.at(nx, ny) && mask.at(nx, ny) == value) {
                out.at(nx, ny) = 1;
                frontier.emplace(nx, ny);
            }
        }
    }
    return out;
}

}  // namespace detail

/// Gradient-based baseline: edge map, threshold, disk closing, then the
/// region flood-filled from the window centroid (nudged off an edge pixel if
/// the centroid lands on one). The output is one 4-connected component, or
/// empty when the window has no edges.
inline BinaryMask segment_baseline(const GrayImage& img, const BoundingBox& box,
                                   const EdgeParams& params = {}) {
    params.require_valid();
    if (box.w <= 0 || box.h <= 0 || box.x < 0 || box.y < 0 ||
        box.x + box.w > img.width || box.y + box.h > img.height)
        throw ParameterError("segment_baseline: box does not lie inside the image");

    int wx0, wy0, wx1, wy1;
    acwe::detail::working_window(box, img.width, img.height, wx0, wy0, wx1, wy1);
    const GrayImage window = acwe::detail::crop(img, wx0, wy0, wx1, wy1);

    const GrayImage grad = gradient_magnitude(window, params.op);
    const double t = params.otsu ? otsu_threshold(grad) : params.threshold;
    BinaryMask edges(window.width, window.height);
    bool any_edge = false;
    for (std::size_t i = 0; i < grad.size(); ++i) {
        edges.data[i] = grad.data[i] > t ? 1 : 0;
        any_edge |= edges.data[i] != 0;
    }
    BinaryMask region(window.width, window.height);
    if (any_edge) {
        edges = detail::closing(edges, params.closing_radius);

        // fill the enclosed region from the centroid, stepping to the nearest
        // non-edge pixel when the centroid itself is on an edge
        const int cx = window.width / 2, cy = window.height / 2;
        int seed_x = -1, seed_y = -1;
        std::int64_t best = std::numeric_limits<std::int64_t>::max();
        for (int y = 0; y < window.height; ++y)
            for (int x = 0; x < window.width; ++x) {
                if (edges.at(x, y)) continue;
                const std::int64_t d2 = static_cast<std::int64_t>(x - cx) * (x - cx) +
                                        static_cast<std::int64_t>(y - cy) * (y - cy);
                if (d2 < best) { best = d2; seed_x = x; seed_y = y; }
            }
        if (seed_x >= 0)
            region = detail::flood_fill(edges, seed_x, seed_y, 0);
    }

    BinaryMask full(img.width, img.height);
    for (int y = 0; y < region.height; ++y)
        for (int x = 0; x < region.width; ++x)
            full.at(wx0 + x, wy0 + y) = region.at(x, y);
    return full;
}

}  // namespace edge
}  // namespace segkit
