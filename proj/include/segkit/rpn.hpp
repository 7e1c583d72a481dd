#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "segkit/core.hpp"

namespace segkit {
namespace rpn {

/// Axis-aligned box in center/size form.
struct Box {
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;

    void require_valid() const {
        if (w <= 0.0 || h <= 0.0)
            throw ParameterError("rpn box: width and height must be positive");
    }
};

enum class AnchorLabel { negative, positive, ignore };

/// One anchor per (scale, ratio) pair: area = scale^2 and w/h = ratio,
/// all centered on the same point. The defaults produce the usual 9.
inline std::vector<Box> generate_anchors(double center_x, double center_y,
                                         const std::vector<double>& scales = {128, 256, 512},
                                         const std::vector<double>& ratios = {0.5, 1.0, 2.0}) {
    if (scales.empty() || ratios.empty())
        throw ParameterError("generate_anchors: scales and ratios must be non-empty");
    std::vector<Box> anchors;
    anchors.reserve(scales.size() * ratios.size());
    for (double s : scales) {
        if (s <= 0.0)
            throw ParameterError("generate_anchors: scales must be positive");
        for (double r : ratios) {
            if (r <= 0.0)
                throw ParameterError("generate_anchors: ratios must be positive");
            const double w = s * std::sqrt(r);
            anchors.push_back({center_x, center_y, w, s * s / w});
        }
    }
    return anchors;
}

/// Intersection area over union area.
inline double iou(const Box& a, const Box& b) {
    a.require_valid();
    b.require_valid();
    const double ix = std::min(a.cx + a.w / 2, b.cx + b.w / 2) -
                      std::max(a.cx - a.w / 2, b.cx - b.w / 2);
    const double iy = std::min(a.cy + a.h / 2, b.cy + b.h / 2) -
                      std::max(a.cy - a.h / 2, b.cy - b.h / 2);
    if (ix <= 0.0 || iy <= 0.0)
        return 0.0;
    const double inter = ix * iy;
    return inter / (a.w * a.h + b.w * b.h - inter);
}

/// Threshold labeling against one ground-truth box: IoU above 0.7 is
/// positive, below 0.3 negative, anything else (the boundary values
/// included) is left out of training.
inline std::vector<AnchorLabel> label_anchors(const std::vector<Box>& anchors, const Box& gt) {
    if (anchors.empty())
        throw ParameterError("label_anchors: no anchors");
    std::vector<AnchorLabel> labels;
    labels.reserve(anchors.size());
    for (const Box& a : anchors) {
        const double overlap = iou(a, gt);
        if (overlap > 0.7)
            labels.push_back(AnchorLabel::positive);
        else if (overlap < 0.3)
            labels.push_back(AnchorLabel::negative);
        else
            labels.push_back(AnchorLabel::ignore);
    }
    return labels;
}

using BoxDelta = std::array<double, 4>;

/// Box regression parameterization relative to an anchor:
/// ((x-xa)/wa, (y-ya)/ha, ln(w/wa), ln(h/ha)) on centers.
inline BoxDelta parameterize(const Box& anchor, const Box& target) {
    anchor.require_valid();
    target.require_valid();
    return {(target.cx - anchor.cx) / anchor.w, (target.cy - anchor.cy) / anchor.h,
            std::log(target.w / anchor.w), std::log(target.h / anchor.h)};
}

/// Inverse of parameterize.
inline Box decode(const Box& anchor, const BoxDelta& t) {
    anchor.require_valid();
    return {anchor.cx + t[0] * anchor.w, anchor.cy + t[1] * anchor.h,
            anchor.w * std::exp(t[2]), anchor.h * std::exp(t[3])};
}

/// Robust regression penalty: quadratic within the unit interval, linear
/// outside (smooth L1).
inline double smooth_robust_loss(double x) {
    const double ax = std::abs(x);
    return ax < 1.0 ? 0.5 * x * x : ax - 0.5;
}

struct AnchorBatch {
    std::vector<Box> anchors;
    std::vector<AnchorLabel> labels;
    std::vector<double> scores;      // predicted objectness p in [0,1]
    std::vector<BoxDelta> t;         // predicted box parameters
    std::vector<BoxDelta> t_star;    // regression targets; used for positives only
    double lambda = 10.0;
    int n_cls = 1;
    int n_reg = 1;

    void require_valid() const {
        const std::size_t n = anchors.size();
        if (labels.size() != n || scores.size() != n || t.size() != n || t_star.size() != n)
            throw ParameterError("anchor batch: field lengths differ");
        if (n_cls < 1 || n_reg < 1)
            throw ParameterError("anchor batch: normalizers must be positive");
    }
};

struct RpnLoss {
    double total = 0.0;
    double cls_term = 0.0;
    double reg_term = 0.0;
};

/// Objectness log loss plus the lambda-weighted regression term. Anchors
/// labeled ignore enter neither sum; the regression penalty is gated off
/// for negatives. The log argument is clamped away from zero so the loss
/// stays finite; a score matching its label exactly contributes exactly 0.
inline RpnLoss rpn_loss(const AnchorBatch& batch) {
    batch.require_valid();
    constexpr double kProbClamp = 1e-12;

    RpnLoss loss;
    for (std::size_t i = 0; i < batch.anchors.size(); ++i) {
        if (batch.labels[i] == AnchorLabel::ignore)
            continue;
        const bool positive = batch.labels[i] == AnchorLabel::positive;
        const double q = positive ? batch.scores[i] : 1.0 - batch.scores[i];
        if (q < 1.0)
            loss.cls_term -= std::log(std::max(q, kProbClamp));
        if (positive) {
            double reg = 0.0;
            for (int j = 0; j < 4; ++j)
                reg += smooth_robust_loss(batch.t[i][j] - batch.t_star[i][j]);
            loss.reg_term += reg;
        }
    }
    loss.cls_term /= static_cast<double>(batch.n_cls);
    loss.reg_term *= batch.lambda / static_cast<double>(batch.n_reg);
    loss.total = loss.cls_term + loss.reg_term;
    return loss;
}

/// Max pooling over a fixed out_h x out_w partition of the region; cell
/// boundaries fall at floor(k*H/out_h). Output size depends only on the
/// requested grid.
inline std::vector<std::vector<double>> roi_pool(const GrayImage& feature,
                                                 const BoundingBox& region,
                                                 int out_h, int out_w) {
    if (region.w <= 0 || region.h <= 0 || region.x < 0 || region.y < 0 ||
        region.x + region.w > feature.width || region.y + region.h > feature.height)
        throw ParameterError("roi_pool: region does not lie inside the feature map");
    if (out_h < 1 || out_w < 1 || out_h > region.h || out_w > region.w)
        throw ParameterError("roi_pool: output grid must be at least 1x1 and no larger than the region");

    std::vector<std::vector<double>> out(out_h, std::vector<double>(out_w));
    for (int i = 0; i < out_h; ++i) {
        const int y0 = region.y + static_cast<int>(static_cast<std::int64_t>(i) * region.h / out_h);
        const int y1 = region.y + static_cast<int>(static_cast<std::int64_t>(i + 1) * region.h / out_h);
        for (int j = 0; j < out_w; ++j) {
            const int x0 = region.x + static_cast<int>(static_cast<std::int64_t>(j) * region.w / out_w);
            const int x1 = region.x + static_cast<int>(static_cast<std::int64_t>(j + 1) * region.w / out_w);
            double best = feature.at(x0, y0);
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x)
                    best = std::max(best, feature.at(x, y));
            out[i][j] = best;
        }
    }
    return out;
}

}  // namespace rpn
}  // namespace segkit
