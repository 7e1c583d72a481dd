#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <utility>
#include <vector>

#include "segkit/core.hpp"

namespace segkit {

struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    std::uint64_t total() const { return tp + fp + fn + tn; }
};

/// Per-pixel confusion counts; label 1 is the positive class.
inline ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& truth) {
    if (!pred.same_shape(truth))
        throw ParameterError("confusion: mask dimensions differ");
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred.data[i] != 0;
        const bool t = truth.data[i] != 0;
        if (p && t) ++c.tp;
        else if (p && !t) ++c.fp;
        else if (!p && t) ++c.fn;
        else ++c.tn;
    }
    return c;
}

/// Overlap similarity 2TP / (2TP + FP + FN). Two empty masks count as a
/// perfect match (1.0).
inline double dice(const ConfusionCounts& c) {
    const std::uint64_t denom = 2 * c.tp + c.fp + c.fn;
    if (denom == 0)
        return 1.0;
    return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

/// (TP + TN) / total. With per-pixel counts this coincides with pixel
/// accuracy.
inline double rand_index(const ConfusionCounts& c) {
    if (c.total() == 0)
        throw ParameterError("rand_index: empty confusion counts");
    return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

namespace detail {

inline double entropy_bits(const std::map<std::int32_t, std::size_t>& counts, std::size_t n) {
    double h = 0.0;
    for (const auto& [label, count] : counts) {
        const double p = static_cast<double>(count) / static_cast<double>(n);
        h -= p * std::log2(p);
    }
    return h;
}

struct JointHistogram {
    std::map<std::int32_t, std::size_t> a_counts;
    std::map<std::int32_t, std::size_t> b_counts;
    std::map<std::pair<std::int32_t, std::int32_t>, std::size_t> joint;
    std::size_t n = 0;
};

inline JointHistogram joint_histogram(const LabelMap& a, const LabelMap& b) {
    if (!a.same_shape(b))
        throw ParameterError("label maps have different dimensions");
    JointHistogram h;
    h.n = a.size();
    for (std::size_t i = 0; i < a.size(); ++i) {
        ++h.a_counts[a.data[i]];
        ++h.b_counts[b.data[i]];
        ++h.joint[{a.data[i], b.data[i]}];
    }
    return h;
}

}  // namespace detail

/// Variation of information in bits: H(a) + H(b) - 2*MI(a,b). Zero iff the
/// maps are identical up to a relabeling.
inline double voi(const LabelMap& a, const LabelMap& b) {
    const auto h = detail::joint_histogram(a, b);
    const double ha = detail::entropy_bits(h.a_counts, h.n);
    const double hb = detail::entropy_bits(h.b_counts, h.n);
    double hab = 0.0;
    for (const auto& [pair, count] : h.joint) {
        const double p = static_cast<double>(count) / static_cast<double>(h.n);
        hab -= p * std::log2(p);
    }
    const double mi = ha + hb - hab;
    return std::max(0.0, ha + hb - 2.0 * mi);
}

/// Global consistency error. The local refinement error at pixel p is
/// |R(a,p) \ R(b,p)| / |R(a,p)| where R(s,p) is the label-region of p in s;
/// GCE takes the cheaper of the two directional sums, averaged over pixels.
inline double gce(const LabelMap& a, const LabelMap& b) {
    const auto h = detail::joint_histogram(a, b);
    double sum_ab = 0.0, sum_ba = 0.0;
    for (const auto& [pair, count] : h.joint) {
        const double nij = static_cast<double>(count);
        const double ni = static_cast<double>(h.a_counts.at(pair.first));
        const double nj = static_cast<double>(h.b_counts.at(pair.second));
        // every pixel in cell (i,j) shares the same local error
        sum_ab += nij * (ni - nij) / ni;
        sum_ba += nij * (nj - nij) / nj;
    }
    return std::min(sum_ab, sum_ba) / static_cast<double>(h.n);
}

namespace detail {

struct PixelCoord {
    int x = 0;
    int y = 0;
};

/// Inner boundary: foreground pixels 4-adjacent to an in-frame background
/// pixel.
inline std::vector<PixelCoord> boundary_pixels(const BinaryMask& mask) {
    std::vector<PixelCoord> out;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(x, y)) continue;
            const bool edge =
                (x > 0 && !mask.at(x - 1, y)) || (x + 1 < mask.width && !mask.at(x + 1, y)) ||
                (y > 0 && !mask.at(x, y - 1)) || (y + 1 < mask.height && !mask.at(x, y + 1));
            if (edge)
                out.push_back({x, y});
        }
    }
    return out;
}

inline double mean_nearest_distance(const std::vector<PixelCoord>& from,
                                    const std::vector<PixelCoord>& to) {
    double total = 0.0;
    for (const auto& p : from) {
        std::int64_t best = std::numeric_limits<std::int64_t>::max();
        for (const auto& q : to) {
            const std::int64_t dx = p.x - q.x;
            const std::int64_t dy = p.y - q.y;
            best = std::min(best, dx * dx + dy * dy);
        }
        total += std::sqrt(static_cast<double>(best));
    }
    return total / static_cast<double>(from.size());
}

}  // namespace detail

/// Boundary displacement error: mean of the two directed average
/// nearest-boundary distances (Euclidean, exact).
inline double bde(const BinaryMask& a, const BinaryMask& b) {
    if (!a.same_shape(b))
        throw ParameterError("bde: mask dimensions differ");
    const auto ba = detail::boundary_pixels(a);
    const auto bb = detail::boundary_pixels(b);
    if (ba.empty() || bb.empty())
        throw EmptyBoundaryError("bde: a mask has no boundary pixels");
    return 0.5 * (detail::mean_nearest_distance(ba, bb) +
                  detail::mean_nearest_distance(bb, ba));
}

/// PSNR between the masks rendered at {0,255}; identical masks give +inf.
inline double psnr(const BinaryMask& pred, const BinaryMask& truth) {
    if (!pred.same_shape(truth))
        throw ParameterError("psnr: mask dimensions differ");
    std::uint64_t diff = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        diff += (pred.data[i] != 0) != (truth.data[i] != 0);
    if (diff == 0)
        return std::numeric_limits<double>::infinity();
    const double mse = 255.0 * 255.0 * static_cast<double>(diff) / static_cast<double>(pred.size());
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

/// Mean absolute difference between the masks rendered at {0,255}.
inline double mae(const BinaryMask& pred, const BinaryMask& truth) {
    if (!pred.same_shape(truth))
        throw ParameterError("mae: mask dimensions differ");
    std::uint64_t diff = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        diff += (pred.data[i] != 0) != (truth.data[i] != 0);
    return 255.0 * static_cast<double>(diff) / static_cast<double>(pred.size());
}

struct ClassifierStats {
    double accuracy = 0.0;
    double ppv = 0.0;
    double npv = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
};

/// Rates from a confusion matrix; a zero denominator yields NaN for that
/// entry rather than failing.
inline ClassifierStats cls_stats(const ConfusionCounts& c) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    auto rate = [&](std::uint64_t num, std::uint64_t denom) {
        return denom == 0 ? nan : static_cast<double>(num) / static_cast<double>(denom);
    };
    ClassifierStats s;
    s.accuracy = rate(c.tp + c.tn, c.total());
    s.ppv = rate(c.tp, c.tp + c.fp);
    s.npv = rate(c.tn, c.tn + c.fn);
    s.sensitivity = rate(c.tp, c.tp + c.fn);
    s.specificity = rate(c.tn, c.tn + c.fp);
    return s;
}

/// Cohen's kappa: chance-corrected agreement from the matrix marginals.
/// Returns NaN when chance agreement is exactly 1.
inline double cohen_kappa(const ConfusionCounts& c) {
    const double n = static_cast<double>(c.total());
    if (c.total() == 0)
        throw ParameterError("cohen_kappa: empty confusion counts");
    const double po = static_cast<double>(c.tp + c.tn) / n;
    const double pred_pos = static_cast<double>(c.tp + c.fp) / n;
    const double truth_pos = static_cast<double>(c.tp + c.fn) / n;
    const double pe = pred_pos * truth_pos + (1.0 - pred_pos) * (1.0 - truth_pos);
    if (pe == 1.0)
        return std::numeric_limits<double>::quiet_NaN();
    return (po - pe) / (1.0 - pe);
}

struct ScoredSample {
    double score = 0.0;
    bool positive = false;
};

struct RocResult {
    std::vector<std::pair<double, double>> curve;  // (fpr, tpr)
    double auc = 0.0;
};

/// ROC curve from sweeping a descending threshold over the distinct scores;
/// tied scores advance the curve in one step. AUC by the trapezoid rule.
inline RocResult roc_auc(std::vector<ScoredSample> samples) {
    std::size_t pos = 0, neg = 0;
    for (const auto& s : samples)
        (s.positive ? pos : neg) += 1;
    if (pos == 0 || neg == 0)
        throw ParameterError("roc_auc: need at least one positive and one negative sample");

    std::sort(samples.begin(), samples.end(),
              [](const ScoredSample& a, const ScoredSample& b) { return a.score > b.score; });

    RocResult r;
    r.curve.emplace_back(0.0, 0.0);
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < samples.size()) {
        const double score = samples[i].score;
        while (i < samples.size() && samples[i].score == score) {
            (samples[i].positive ? tp : fp) += 1;
            ++i;
        }
        r.curve.emplace_back(static_cast<double>(fp) / static_cast<double>(neg),
                             static_cast<double>(tp) / static_cast<double>(pos));
    }
    for (std::size_t k = 1; k < r.curve.size(); ++k) {
        const auto& [x0, y0] = r.curve[k - 1];
        const auto& [x1, y1] = r.curve[k];
        r.auc += (x1 - x0) * (y0 + y1) / 2.0;
    }
    return r;
}

struct SegReport {
    double dice = 0.0;
    double accuracy = 0.0;
    double ri = 0.0;
    double voi = 0.0;
    double gce = 0.0;
    double bde = 0.0;
    double psnr = 0.0;  // +inf for identical masks
    double mae = 0.0;
};

/// Assembles the full segmentation report for one predicted/truth mask pair.
inline SegReport evaluate_pair(const BinaryMask& pred, const BinaryMask& truth) {
    const ConfusionCounts c = confusion(pred, truth);
    SegReport r;
    r.dice = dice(c);
    r.accuracy = cls_stats(c).accuracy;
    r.ri = rand_index(c);
    r.voi = voi(to_label_map(pred), to_label_map(truth));
    r.gce = gce(to_label_map(pred), to_label_map(truth));
    r.bde = bde(pred, truth);
    r.psnr = psnr(pred, truth);
    r.mae = mae(pred, truth);
    return r;
}

}  // namespace segkit
