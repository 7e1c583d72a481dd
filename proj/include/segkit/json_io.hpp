#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include <json.hpp>

#include "segkit/acwe.hpp"
#include "segkit/core.hpp"
#include "segkit/edge.hpp"
#include "segkit/image_io.hpp"
#include "segkit/metrics.hpp"
#include "segkit/phantom.hpp"
#include "segkit/rpn.hpp"

namespace segkit {

using json = nlohmann::json;

inline json frame_to_json(const Frame& frame) {
    switch (frame.kind) {
        case Frame::Kind::downsampled128: return "downsampled128";
        case Frame::Kind::native512: return "native512";
        case Frame::Kind::custom: break;
    }
    return json{{"custom", {frame.width, frame.height}}};
}

inline Frame frame_from_json(const json& j) {
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "downsampled128") return Frame::downsampled128();
        if (s == "native512") return Frame::native512();
        throw FormatError("unknown frame name: " + s);
    }
    if (j.is_object() && j.contains("custom") && j["custom"].is_array() && j["custom"].size() == 2)
        return Frame::custom(j["custom"][0].get<int>(), j["custom"][1].get<int>());
    throw FormatError("malformed frame value");
}

inline json bbox_to_json(const BoundingBox& box) {
    return json{{"x", box.x}, {"y", box.y}, {"w", box.w}, {"h", box.h},
                {"frame", frame_to_json(box.frame)}};
}

inline BoundingBox bbox_from_json(const json& j) {
    try {
        BoundingBox box;
        box.x = j.at("x").get<int>();
        box.y = j.at("y").get<int>();
        box.w = j.at("w").get<int>();
        box.h = j.at("h").get<int>();
        box.frame = frame_from_json(j.at("frame"));
        box.require_valid();
        return box;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed bounding box JSON: ") + e.what());
    }
}

inline json phantom_spec_to_json(const PhantomSpec& spec) {
    json shape;
    switch (spec.shape) {
        case PhantomSpec::Shape::disk:
            shape = json{{"disk", {spec.cx, spec.cy, spec.p0}}};
            break;
        case PhantomSpec::Shape::square:
            shape = json{{"square", {spec.cx, spec.cy, spec.p0}}};
            break;
        case PhantomSpec::Shape::ellipse:
            shape = json{{"ellipse", {spec.cx, spec.cy, spec.p0, spec.p1}}};
            break;
    }
    return json{{"frame", {spec.frame_w, spec.frame_h}},
                {"shape", shape},
                {"fg_intensity", spec.fg_intensity},
                {"bg_intensity", spec.bg_intensity},
                {"noise_sigma", spec.noise_sigma},
                {"seed", spec.seed}};
}

inline PhantomSpec phantom_spec_from_json(const json& j) {
    try {
        PhantomSpec spec;
        spec.frame_w = j.at("frame").at(0).get<int>();
        spec.frame_h = j.at("frame").at(1).get<int>();
        const json& shape = j.at("shape");
        if (shape.contains("disk")) {
            spec.shape = PhantomSpec::Shape::disk;
            spec.cx = shape["disk"].at(0).get<double>();
            spec.cy = shape["disk"].at(1).get<double>();
            spec.p0 = shape["disk"].at(2).get<double>();
        } else if (shape.contains("square")) {
            spec.shape = PhantomSpec::Shape::square;
            spec.cx = shape["square"].at(0).get<double>();
            spec.cy = shape["square"].at(1).get<double>();
            spec.p0 = shape["square"].at(2).get<double>();
        } else if (shape.contains("ellipse")) {
            spec.shape = PhantomSpec::Shape::ellipse;
            spec.cx = shape["ellipse"].at(0).get<double>();
            spec.cy = shape["ellipse"].at(1).get<double>();
            spec.p0 = shape["ellipse"].at(2).get<double>();
            spec.p1 = shape["ellipse"].at(3).get<double>();
        } else {
            throw FormatError("phantom spec: unknown shape");
        }
        spec.fg_intensity = j.at("fg_intensity").get<double>();
        spec.bg_intensity = j.at("bg_intensity").get<double>();
        spec.noise_sigma = j.value("noise_sigma", 0.0);
        spec.seed = j.value("seed", std::uint64_t{0});
        return spec;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed phantom spec JSON: ") + e.what());
    }
}

inline json run_stats_to_json(const acwe::RunStats& stats) {
    return json{{"iterations", stats.iterations},
                {"converged", stats.converged},
                {"c1", stats.c1},
                {"c2", stats.c2}};
}

inline json seg_report_to_json(const SegReport& r) {
    json j{{"dice", r.dice}, {"accuracy", r.accuracy}, {"ri", r.ri},    {"voi", r.voi},
           {"gce", r.gce},   {"bde", r.bde},           {"mae", r.mae}};
    if (std::isinf(r.psnr))
        j["psnr"] = "inf";
    else
        j["psnr"] = r.psnr;
    return j;
}

inline SegReport seg_report_from_json(const json& j) {
    try {
        SegReport r;
        r.dice = j.at("dice").get<double>();
        r.accuracy = j.at("accuracy").get<double>();
        r.ri = j.at("ri").get<double>();
        r.voi = j.at("voi").get<double>();
        r.gce = j.at("gce").get<double>();
        r.bde = j.at("bde").get<double>();
        r.mae = j.at("mae").get<double>();
        const json& p = j.at("psnr");
        r.psnr = p.is_string() ? std::numeric_limits<double>::infinity() : p.get<double>();
        return r;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed segmentation report JSON: ") + e.what());
    }
}

inline void acwe_params_from_json(const json& j, acwe::AcweParams& p) {
    try {
        p.lambda1 = j.value("lambda1", p.lambda1);
        p.lambda2 = j.value("lambda2", p.lambda2);
        p.iterations = j.value("iterations", p.iterations);
        p.smoothing_passes = j.value("smoothing_passes", p.smoothing_passes);
        p.init_margin = j.value("init_margin", p.init_margin);
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed acwe params: ") + e.what());
    }
    p.require_valid();
}

inline void edge_params_from_json(const json& j, edge::EdgeParams& p) {
    try {
        if (j.contains("operator")) {
            const std::string op = j["operator"].get<std::string>();
            if (op == "prewitt") p.op = edge::Operator::prewitt;
            else if (op == "sobel") p.op = edge::Operator::sobel;
            else throw FormatError("unknown edge operator: " + op);
        }
        if (j.contains("threshold")) {
            const json& t = j["threshold"];
            if (t.is_string() && t.get<std::string>() == "otsu") {
                p.otsu = true;
            } else {
                p.otsu = false;
                p.threshold = t.get<double>();
            }
        }
        p.closing_radius = j.value("closing_radius", p.closing_radius);
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed edge params: ") + e.what());
    }
    p.require_valid();
}

inline json anchor_label_to_json(rpn::AnchorLabel label) {
    switch (label) {
        case rpn::AnchorLabel::positive: return "positive";
        case rpn::AnchorLabel::negative: return "negative";
        case rpn::AnchorLabel::ignore: break;
    }
    return "ignore";
}

inline rpn::AnchorLabel anchor_label_from_json(const json& j) {
    const std::string s = j.get<std::string>();
    if (s == "positive") return rpn::AnchorLabel::positive;
    if (s == "negative") return rpn::AnchorLabel::negative;
    if (s == "ignore") return rpn::AnchorLabel::ignore;
    throw FormatError("unknown anchor label: " + s);
}

inline json box_to_json(const rpn::Box& b) {
    return json{{"cx", b.cx}, {"cy", b.cy}, {"w", b.w}, {"h", b.h}};
}

inline rpn::Box box_from_json(const json& j) {
    return {j.at("cx").get<double>(), j.at("cy").get<double>(),
            j.at("w").get<double>(), j.at("h").get<double>()};
}

/// Anchor batch JSON. Missing normalizers default to the spec of the batch
/// itself: n_cls counts the anchors that enter training, n_reg counts all
/// anchor locations.
inline rpn::AnchorBatch anchor_batch_from_json(const json& j) {
    try {
        rpn::AnchorBatch batch;
        for (const json& a : j.at("anchors"))
            batch.anchors.push_back(box_from_json(a));
        for (const json& l : j.at("labels"))
            batch.labels.push_back(anchor_label_from_json(l));
        batch.scores = j.at("scores").get<std::vector<double>>();
        auto read_deltas = [&](const char* key, std::vector<rpn::BoxDelta>& out) {
            if (!j.contains(key)) {
                out.assign(batch.anchors.size(), rpn::BoxDelta{});
                return;
            }
            for (const json& row : j[key]) {
                if (row.is_null())
                    out.push_back(rpn::BoxDelta{});
                else
                    out.push_back({row.at(0).get<double>(), row.at(1).get<double>(),
                                   row.at(2).get<double>(), row.at(3).get<double>()});
            }
        };
        read_deltas("t", batch.t);
        read_deltas("t_star", batch.t_star);
        batch.lambda = j.value("lambda", 10.0);
        if (j.contains("n_cls")) {
            batch.n_cls = j["n_cls"].get<int>();
        } else {
            int used = 0;
            for (auto l : batch.labels)
                used += l != rpn::AnchorLabel::ignore;
            batch.n_cls = std::max(1, used);
        }
        batch.n_reg = j.contains("n_reg") ? j["n_reg"].get<int>()
                                          : std::max<int>(1, static_cast<int>(batch.anchors.size()));
        batch.require_valid();
        return batch;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed anchor batch JSON: ") + e.what());
    }
}

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open JSON file: " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError("malformed JSON in " + path + ": " + e.what());
    }
}

inline void save_json_file(const json& j, const std::string& path) {
    const std::string text = j.dump(2) + "\n";
    detail::write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

}  // namespace segkit
