#include <array>
#include <cmath>
#include <queue>
#include <random>

#include <gtest/gtest.h>

#include "segkit/acwe.hpp"
#include "segkit/edge.hpp"
#include "segkit/metrics.hpp"
#include "segkit/phantom.hpp"

#include "test_util.hpp"

using namespace segkit;
using edge::EdgeParams;
using edge::Operator;
using edge::gradient_magnitude;
using edge::otsu_threshold;

namespace {

/// Reference Otsu: recompute both class statistics from scratch for every
/// candidate threshold.
double brute_otsu(const GrayImage& img) {
    std::array<double, 256> hist{};
    for (double v : img.data)
        hist[detail::intensity_bin(v)] += 1.0;

    int best_k = 0;
    double best = -1.0;
    for (int k = 0; k < 256; ++k) {
        double w0 = 0.0, w1 = 0.0, m0 = 0.0, m1 = 0.0;
        for (int b = 0; b <= k; ++b) {
            w0 += hist[b];
            m0 += b * hist[b];
        }
        for (int b = k + 1; b < 256; ++b) {
            w1 += hist[b];
            m1 += b * hist[b];
        }
        if (w0 == 0.0 || w1 == 0.0) continue;
        const double d = m0 / w0 - m1 / w1;
        const double between = w0 * w1 * d * d;
        if (between > best) {
            best = between;
            best_k = k;
        }
    }
    return best < 0.0 ? 0.0 : (best_k + 0.5) / 255.0;
}

std::size_t foreground(const BinaryMask& m) {
    std::size_t n = 0;
    for (auto v : m.data)
        n += v;
    return n;
}

/// True when the foreground is empty or a single 4-connected component.
bool single_component_or_empty(const BinaryMask& mask) {
    int sx = -1, sy = -1;
    for (int y = 0; y < mask.height && sx < 0; ++y)
        for (int x = 0; x < mask.width; ++x)
            if (mask.at(x, y)) { sx = x; sy = y; break; }
    if (sx < 0)
        return true;

    BinaryMask seen(mask.width, mask.height);
    std::queue<std::pair<int, int>> frontier;
    frontier.emplace(sx, sy);
    seen.at(sx, sy) = 1;
    std::size_t reached = 1;
    const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
    while (!frontier.empty()) {
        const auto [cx, cy] = frontier.front();
        frontier.pop();
        for (int k = 0; k < 4; ++k) {
            const int nx = cx + dx[k], ny = cy + dy[k];
            if (nx >= 0 && nx < mask.width && ny >= 0 && ny < mask.height &&
                mask.at(nx, ny) && !seen.at(nx, ny)) {
                seen.at(nx, ny) = 1;
                ++reached;
                frontier.emplace(nx, ny);
            }
        }
    }
    return reached == foreground(mask);
}

}  // namespace

TEST(GradientMagnitude, ConstantImageIsZero) {
    const GrayImage img(8, 8, 0.7);
    for (double v : gradient_magnitude(img, Operator::prewitt).data)
        EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(GradientMagnitude, VerticalStepRespondsAtTheStep) {
    GrayImage img(10, 6, 0.0);
    for (int y = 0; y < 6; ++y)
        for (int x = 5; x < 10; ++x)
            img.at(x, y) = 1.0;

    for (Operator op : {Operator::prewitt, Operator::sobel}) {
        const GrayImage g = gradient_magnitude(img, op);
        for (int y = 1; y < 5; ++y) {
            EXPECT_DOUBLE_EQ(g.at(4, y), 1.0);  // the two columns astride the step
            EXPECT_DOUBLE_EQ(g.at(5, y), 1.0);
            EXPECT_DOUBLE_EQ(g.at(1, y), 0.0);  // far away
            EXPECT_DOUBLE_EQ(g.at(8, y), 0.0);
        }
    }
}

TEST(GradientMagnitude, RejectsTinyImages) {
    EXPECT_THROW(gradient_magnitude(GrayImage(2, 5, 0.1), Operator::prewitt), ParameterError);
}

TEST(GradientMagnitude, TranslationEquivariantAwayFromBorders) {
    std::mt19937 rng(71);
    GrayImage img(24, 24, 0.2);
    for (int y = 8; y < 14; ++y)
        for (int x = 8; x < 14; ++x)
            img.at(x, y) = 0.9;

    GrayImage shifted(24, 24, 0.2);
    for (int y = 8; y < 14; ++y)
        for (int x = 8; x < 14; ++x)
            shifted.at(x + 2, y + 3) = 0.9;

    const GrayImage g = gradient_magnitude(img, Operator::sobel);
    const GrayImage gs = gradient_magnitude(shifted, Operator::sobel);
    for (int y = 4; y < 18; ++y)
        for (int x = 4; x < 18; ++x)
            EXPECT_NEAR(g.at(x, y), gs.at(x + 2, y + 3), 1e-12);
}

TEST(OtsuThreshold, ConstantImageGivesZero) {
    EXPECT_DOUBLE_EQ(otsu_threshold(GrayImage(6, 6, 0.5)), 0.0);
}

TEST(OtsuThreshold, SeparatesTwoLevels) {
    GrayImage img(10, 10);
    for (std::size_t i = 0; i < img.size(); ++i)
        img.data[i] = i % 2 == 0 ? 0.2 : 0.8;
    const double t = otsu_threshold(img);
    EXPECT_GT(t, 0.2);
    EXPECT_LT(t, 0.8);
}

TEST(OtsuThreshold, ThreeLevelHistogramMatchesBruteForce) {
    GrayImage img(12, 1);
    img.data = {0.1, 0.1, 0.1, 0.1, 0.1, 0.5, 0.5, 0.5, 0.9, 0.9, 0.9, 0.9};
    EXPECT_DOUBLE_EQ(otsu_threshold(img), brute_otsu(img));
}

TEST(OtsuThreshold, MatchesBruteForceOnRandomImages) {
    std::mt19937 rng(73);
    for (int trial = 0; trial < 40; ++trial) {
        const GrayImage img = testutil::random_image(16, 16, rng);
        EXPECT_DOUBLE_EQ(otsu_threshold(img), brute_otsu(img));
    }
}

TEST(SegmentBaseline, NoiselessDiskPhantom) {
    const PhantomResult phantom = generate(PhantomSpec::disk(512, 512, 256, 256, 40));
    const BinaryMask mask = edge::segment_baseline(phantom.image, phantom.bbox);
    EXPECT_GE(dice(confusion(mask, phantom.mask)), 0.95);
}

TEST(SegmentBaseline, ConstantWindowGivesEmptyMask) {
    const GrayImage img(128, 128, 0.5);
    const BoundingBox box{40, 40, 40, 40, Frame::downsampled128()};
    const BinaryMask mask = edge::segment_baseline(img, box);
    EXPECT_EQ(foreground(mask), 0u);
}

TEST(SegmentBaseline, ChanVeseWinsOnNoisyPhantom) {
    PhantomSpec spec = PhantomSpec::disk(512, 512, 256, 256, 40);
    spec.noise_sigma = 0.1;
    spec.seed = 11;
    const PhantomResult phantom = generate(spec);
    const BinaryMask baseline = edge::segment_baseline(phantom.image, phantom.bbox);
    const auto [contour, stats] = acwe::segment(phantom.image, phantom.bbox);
    const double dice_baseline = dice(confusion(baseline, phantom.mask));
    const double dice_contour = dice(confusion(contour, phantom.mask));
    EXPECT_LT(dice_baseline, dice_contour);
}

TEST(SegmentBaseline, OutputIsOneComponentOrEmpty) {
    std::mt19937 rng(79);
    for (int trial = 0; trial < 6; ++trial) {
        PhantomSpec spec = PhantomSpec::disk(128, 128, 64, 64, 20 + 3 * trial);
        spec.noise_sigma = 0.05 * (trial % 3);
        spec.seed = 100 + trial;
        const PhantomResult phantom = generate(spec);
        const BinaryMask mask = edge::segment_baseline(phantom.image, phantom.bbox);
        EXPECT_TRUE(single_component_or_empty(mask));
    }
}

TEST(SegmentBaseline, RejectsBoxOutsideImage) {
    const GrayImage img(64, 64, 0.5);
    const BoundingBox box{-2, 10, 20, 20, Frame::custom(64, 64)};
    EXPECT_THROW(edge::segment_baseline(img, box), ParameterError);
}

TEST(SegmentBaseline, FixedThresholdIsRespected) {
    const PhantomResult phantom = generate(PhantomSpec::disk(128, 128, 64, 64, 25));
    EdgeParams params;
    params.otsu = false;
    params.threshold = 0.99;  // keeps only the very peak of the edge map
    const BinaryMask sparse_edges = edge::segment_baseline(phantom.image, phantom.bbox, params);
    params.threshold = 0.1;   // thick edge ring
    const BinaryMask dense_edges = edge::segment_baseline(phantom.image, phantom.bbox, params);
    // more edge pixels confine the fill to a smaller enclosed region
    EXPECT_LT(foreground(dense_edges), foreground(sparse_edges));
}

TEST(EdgeParams, Validation) {
    EdgeParams params;
    params.otsu = false;
    params.threshold = 1.5;
    EXPECT_THROW(params.require_valid(), ParameterError);
    params.threshold = 0.5;
    params.closing_radius = -1;
    EXPECT_THROW(params.require_valid(), ParameterError);
}
