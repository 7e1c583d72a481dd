#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "segkit/core.hpp"
#include "segkit/preprocess.hpp"

namespace segkit {
namespace acwe {

struct AcweParams {
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    int iterations = 100;
    int smoothing_passes = 8;
    int init_margin = 0;

    void require_valid() const {
        if (lambda1 <= 0.0 || lambda2 <= 0.0)
            throw ParameterError("acwe: lambda weights must be positive");
        if (iterations < 1)
            throw ParameterError("acwe: need at least one iteration");
        if (smoothing_passes < 0 || init_margin < 0)
            throw ParameterError("acwe: smoothing passes and margin must be non-negative");
    }
};

/// Binary level set plus the two region means. u = 1 marks the inside of the
/// contour; the contour itself is the boundary of {u = 1}.
struct LevelSetState {
    BinaryMask u;
    double c1 = 0.0;
    double c2 = 0.0;
    int iteration = 0;
    bool converged = false;
};

struct RegionMeans {
    double c1 = 0.0;
    double c2 = 0.0;
    bool inside_empty = false;
    bool outside_empty = false;
};

/// Mean intensity inside {u=1} and outside. An empty region gets mean 0 and
/// its flag set; never fatal.
inline RegionMeans region_means(const GrayImage& img, const BinaryMask& u) {
    if (!img.same_shape(u))
        throw ParameterError("region_means: image and level set dimensions differ");
    double sum_in = 0.0, sum_out = 0.0;
    std::size_t n_in = 0, n_out = 0;
    for (std::size_t i = 0; i < img.size(); ++i) {
        if (u.data[i]) {
            sum_in += img.data[i];
            ++n_in;
        } else {
            sum_out += img.data[i];
            ++n_out;
        }
    }
    RegionMeans m;
    m.inside_empty = n_in == 0;
    m.outside_empty = n_out == 0;
    m.c1 = n_in ? sum_in / static_cast<double>(n_in) : 0.0;
    m.c2 = n_out ? sum_out / static_cast<double>(n_out) : 0.0;
    return m;
}

/// Square level set: u = 1 exactly on `box` inset by `margin`, inside a
/// window of the given dimensions. Box coordinates are window-local.
inline LevelSetState init_square(const BoundingBox& box, int margin, int window_w, int window_h) {
    if (margin < 0)
        throw ParameterError("init_square: margin must be non-negative");
    if (box.w <= 0 || box.h <= 0 || box.x < 0 || box.y < 0 ||
        box.x + box.w > window_w || box.y + box.h > window_h)
        throw ParameterError("init_square: box does not fit the working window");
    const int x0 = box.x + margin;
    const int y0 = box.y + margin;
    const int x1 = box.x + box.w - margin;  // exclusive
    const int y1 = box.y + box.h - margin;
    if (x1 - x0 <= 0 || y1 - y0 <= 0)
        throw ParameterError("init_square: margin collapses the box");

    LevelSetState state;
    state.u = BinaryMask(window_w, window_h);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
            state.u.at(x, y) = 1;
    return state;
}

namespace detail {

// Four 3-pixel line structuring elements through the center.
inline constexpr std::array<std::array<int, 2>, 4> kLineDirs = {{{1, 0}, {0, 1}, {1, 1}, {1, -1}}};

/// sup-of-inf over the line elements (lines truncated at the border).
inline BinaryMask si_operator(const BinaryMask& u) {
    BinaryMask out(u.width, u.height);
    for (int y = 0; y < u.height; ++y) {
        for (int x = 0; x < u.width; ++x) {
            std::uint8_t best = 0;
            for (const auto& d : kLineDirs) {
                std::uint8_t line_min = 1;
                for (int k = -1; k <= 1; ++k) {
                    const int nx = x + k * d[0];
                    const int ny = y + k * d[1];
                    if (u.in_bounds(nx, ny))
                        line_min = std::min(line_min, u.at(nx, ny));
                }
                best = std::max(best, line_min);
                if (best) break;
            }
            out.at(x, y) = best;
        }
    }
    return out;
}

/// inf-of-sup over the line elements.
inline BinaryMask is_operator(const BinaryMask& u) {
    BinaryMask out(u.width, u.height);
    for (int y = 0; y < u.height; ++y) {
        for (int x = 0; x < u.width; ++x) {
            std::uint8_t worst = 1;
            for (const auto& d : kLineDirs) {
                std::uint8_t line_max = 0;
                for (int k = -1; k <= 1; ++k) {
                    const int nx = x + k * d[0];
                    const int ny = y + k * d[1];
                    if (u.in_bounds(nx, ny))
                        line_max = std::max(line_max, u.at(nx, ny));
                }
                worst = std::min(worst, line_max);
                if (!worst) break;
            }
            out.at(x, y) = worst;
        }
    }
    return out;
}

/// Boundary band: pixels whose 3x3 neighbourhood (truncated at the border)
/// contains both values, i.e. where the morphological gradient is positive.
inline bool on_boundary_band(const BinaryMask& u, int x, int y) {
    bool has0 = false, has1 = false;
    for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
            const int nx = x + dx;
            const int ny = y + dy;
            if (!u.in_bounds(nx, ny)) continue;
            (u.at(nx, ny) ? has1 : has0) = true;
        }
    }
    return has0 && has1;
}

}  // namespace detail

/// Curvature smoothing: each pass applies one composed morphological
/// operator, alternating SI∘IS on even passes with IS∘SI on odd ones.
inline BinaryMask smooth(const BinaryMask& u, int passes) {
    if (passes < 0)
        throw ParameterError("smooth: passes must be non-negative");
    BinaryMask out = u;
    for (int k = 0; k < passes; ++k) {
        if (k % 2 == 0)
            out = detail::si_operator(detail::is_operator(out));
        else
            out = detail::is_operator(detail::si_operator(out));
    }
    return out;
}

/// One contour update: recompute the region means, re-decide every pixel on
/// the boundary band by comparing the lambda-weighted squared deviations,
/// then smooth. Convergence is an unchanged level set or exactly equal
/// means.
inline LevelSetState acwe_step(const GrayImage& img, const LevelSetState& state,
                               const AcweParams& params) {
    params.require_valid();
    if (!img.same_shape(state.u))
        throw ParameterError("acwe_step: image and level set dimensions differ");

    LevelSetState next = state;
    const RegionMeans m = region_means(img, state.u);
    next.c1 = m.c1;
    next.c2 = m.c2;
    next.iteration = state.iteration + 1;

    if (m.c1 == m.c2) {
        next.converged = true;
        return next;
    }

    BinaryMask updated = state.u;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            if (!detail::on_boundary_band(state.u, x, y)) continue;
            const double d1 = img.at(x, y) - m.c1;
            const double d2 = img.at(x, y) - m.c2;
            updated.at(x, y) = params.lambda1 * d1 * d1 < params.lambda2 * d2 * d2 ? 1 : 0;
        }
    }
    next.u = smooth(updated, params.smoothing_passes);
    next.converged = next.u == state.u;
    return next;
}

struct RunStats {
    int iterations = 0;
    bool converged = false;
    double c1 = 0.0;
    double c2 = 0.0;
};

namespace detail {

/// The working window pads the detector box by 10% of its larger side
/// (at least 4 px), clamped to the image.
inline void working_window(const BoundingBox& box, int img_w, int img_h,
                           int& wx0, int& wy0, int& wx1, int& wy1) {
    const int pad = std::max(4, static_cast<int>(std::lround(0.1 * std::max(box.w, box.h))));
    wx0 = std::max(0, box.x - pad);
    wy0 = std::max(0, box.y - pad);
    wx1 = std::min(img_w, box.x + box.w + pad);
    wy1 = std::min(img_h, box.y + box.h + pad);
}

inline GrayImage crop(const GrayImage& img, int x0, int y0, int x1, int y1) {
    GrayImage out(x1 - x0, y1 - y0);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
            out.at(x - x0, y - y0) = img.at(x, y);
    return out;
}

}  // namespace detail

/// Box-seeded segmentation: crop a padded window around the detector box,
/// stretch contrast and equalize, evolve the square level set, then embed
/// the result back into the full frame.
inline std::pair<BinaryMask, RunStats> segment(const GrayImage& img, const BoundingBox& box,
                                               const AcweParams& params = {}) {
    params.require_valid();
    if (box.w <= 0 || box.h <= 0 || box.x < 0 || box.y < 0 ||
        box.x + box.w > img.width || box.y + box.h > img.height)
        throw ParameterError("segment: box does not lie inside the image");

    int wx0, wy0, wx1, wy1;
    detail::working_window(box, img.width, img.height, wx0, wy0, wx1, wy1);
    GrayImage window = detail::crop(img, wx0, wy0, wx1, wy1);
    window = histogram_equalize(contrast_stretch(window, 2.0, 98.0));

    const BoundingBox local{box.x - wx0, box.y - wy0, box.w, box.h, Frame::custom(window.width, window.height)};
    LevelSetState state = init_square(local, params.init_margin, window.width, window.height);

    while (state.iteration < params.iterations && !state.converged)
        state = acwe_step(window, state, params);

    BinaryMask full(img.width, img.height);
    for (int y = 0; y < window.height; ++y)
        for (int x = 0; x < window.width; ++x)
            full.at(wx0 + x, wy0 + y) = state.u.at(x, y);

    RunStats stats{state.iteration, state.converged, state.c1, state.c2};
    return {std::move(full), stats};
}

}  // namespace acwe
}  // namespace segkit
