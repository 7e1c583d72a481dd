#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "segkit/acwe.hpp"
#include "segkit/core.hpp"
#include "segkit/edge.hpp"
#include "segkit/image_io.hpp"
#include "segkit/json_io.hpp"
#include "segkit/log.hpp"
#include "segkit/metrics.hpp"

namespace segkit {
namespace pipeline {

enum class Method { chanvese, prewitt, sobel };

inline std::string method_name(Method m) {
    switch (m) {
        case Method::chanvese: return "chanvese";
        case Method::prewitt: return "prewitt";
        case Method::sobel: return "sobel";
    }
    return "chanvese";
}

inline Method method_from_name(const std::string& s) {
    if (s == "chanvese") return Method::chanvese;
    if (s == "prewitt") return Method::prewitt;
    if (s == "sobel") return Method::sobel;
    throw ParameterError("unknown method: " + s);
}

struct RunConfig {
    acwe::AcweParams acwe;
    edge::EdgeParams edge;
    struct Io {
        std::string input;
        std::string output_dir;
    } io;
    int parallelism = 1;
    std::uint64_t seed = 0;

    void require_valid() const {
        acwe.require_valid();
        edge.require_valid();
        if (parallelism < 1)
            throw ParameterError("config: parallelism must be at least 1");
    }
};

/// Config file keys mirror the RunConfig fields; absent keys keep their
/// defaults.
inline RunConfig config_from_json(const json& j) {
    RunConfig config;
    try {
        if (j.contains("acwe")) acwe_params_from_json(j["acwe"], config.acwe);
        if (j.contains("edge")) edge_params_from_json(j["edge"], config.edge);
        if (j.contains("io")) {
            config.io.input = j["io"].value("input", "");
            config.io.output_dir = j["io"].value("output_dir", "");
        }
        config.parallelism = j.value("parallelism", 1);
        config.seed = j.value("seed", std::uint64_t{0});
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed config JSON: ") + e.what());
    }
    config.require_valid();
    return config;
}

struct CaseInput {
    std::string id;
    std::string image_path;
    BoundingBox bbox;
    std::optional<std::string> truth_path;
    std::optional<double> confidence;
};

struct CaseRecord {
    std::string id;
    std::string image_path;
    BoundingBox bbox;
    std::optional<std::string> truth_path;
    Method method = Method::chanvese;
    std::optional<acwe::RunStats> stats;   // contour methods only
    std::optional<SegReport> report;       // present iff a truth mask was supplied
    std::optional<double> confidence;
};

inline json case_record_to_json(const CaseRecord& r) {
    json j{{"id", r.id},
           {"image", r.image_path},
           {"bbox", bbox_to_json(r.bbox)},
           {"method", method_name(r.method)}};
    j["truth"] = r.truth_path ? json(*r.truth_path) : json();
    j["stats"] = r.stats ? run_stats_to_json(*r.stats) : json();
    j["report"] = r.report ? seg_report_to_json(*r.report) : json();
    j["confidence"] = r.confidence ? json(*r.confidence) : json();
    return j;
}

inline CaseRecord case_record_from_json(const json& j) {
    try {
        CaseRecord r;
        r.id = j.at("id").get<std::string>();
        r.image_path = j.at("image").get<std::string>();
        r.bbox = bbox_from_json(j.at("bbox"));
        r.method = method_from_name(j.at("method").get<std::string>());
        if (j.contains("truth") && !j["truth"].is_null())
            r.truth_path = j["truth"].get<std::string>();
        if (j.contains("stats") && !j["stats"].is_null()) {
            acwe::RunStats s;
            s.iterations = j["stats"].at("iterations").get<int>();
            s.converged = j["stats"].at("converged").get<bool>();
            s.c1 = j["stats"].at("c1").get<double>();
            s.c2 = j["stats"].at("c2").get<double>();
            r.stats = s;
        }
        if (j.contains("report") && !j["report"].is_null())
            r.report = seg_report_from_json(j["report"]);
        if (j.contains("confidence") && !j["confidence"].is_null())
            r.confidence = j["confidence"].get<double>();
        return r;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed case record JSON: ") + e.what());
    }
}

/// Bounding box file: the box fields plus an optional pass-through detection
/// confidence.
inline std::pair<BoundingBox, std::optional<double>> load_bbox_file(const std::string& path) {
    const json j = load_json_file(path);
    BoundingBox box = bbox_from_json(j);
    std::optional<double> confidence;
    if (j.contains("confidence") && !j["confidence"].is_null())
        confidence = j["confidence"].get<double>();
    return {box, confidence};
}

/// Runs one case: load, map the box into the image's native frame if it was
/// produced in another frame, segment, and evaluate when truth is supplied.
inline CaseRecord run_case(const CaseInput& input, Method method, const RunConfig& config,
                           BinaryMask* mask_out = nullptr) {
    const GrayImage img = load_image(input.image_path);

    BoundingBox box = input.bbox;
    const Frame native = Frame::of_size(img.width, img.height);
    if (box.frame != native) {
        log::debug("case " + input.id + ": mapping bbox into the native frame");
        box = map_bbox(box, box.frame, native);
    }

    CaseRecord record;
    record.id = input.id;
    record.image_path = input.image_path;
    record.bbox = box;
    record.truth_path = input.truth_path;
    record.method = method;
    record.confidence = input.confidence;

    BinaryMask mask;
    if (method == Method::chanvese) {
        auto [m, stats] = acwe::segment(img, box, config.acwe);
        mask = std::move(m);
        record.stats = stats;
    } else {
        edge::EdgeParams params = config.edge;
        params.op = method == Method::sobel ? edge::Operator::sobel : edge::Operator::prewitt;
        mask = edge::segment_baseline(img, box, params);
    }

    if (input.truth_path) {
        const BinaryMask truth = load_mask(*input.truth_path);
        record.report = evaluate_pair(mask, truth);
    }
    if (mask_out)
        *mask_out = std::move(mask);
    return record;
}

/// Boundary of the predicted region drawn at full intensity over the input.
inline GrayImage render_overlay(const GrayImage& img, const BinaryMask& mask) {
    if (!img.same_shape(mask))
        throw ParameterError("render_overlay: image and mask dimensions differ");
    GrayImage out = img;
    for (const auto& p : detail::boundary_pixels(mask))
        out.at(p.x, p.y) = 1.0;
    return out;
}

inline std::vector<CaseInput> manifest_from_json(const json& j, const std::string& base_dir) {
    if (!j.is_array())
        throw FormatError("case manifest must be a JSON array");
    auto resolve = [&](const std::string& p) {
        return std::filesystem::path(p).is_absolute()
                   ? p
                   : (std::filesystem::path(base_dir) / p).string();
    };
    std::vector<CaseInput> cases;
    try {
        for (const json& row : j) {
            CaseInput c;
            c.id = row.at("id").get<std::string>();
            c.image_path = resolve(row.at("image").get<std::string>());
            const json& bbox = row.at("bbox");
            if (bbox.is_string()) {
                auto [box, confidence] = load_bbox_file(resolve(bbox.get<std::string>()));
                c.bbox = box;
                c.confidence = confidence;
            } else {
                c.bbox = bbox_from_json(bbox);
            }
            if (row.contains("truth") && !row["truth"].is_null())
                c.truth_path = resolve(row["truth"].get<std::string>());
            if (row.contains("confidence") && !row["confidence"].is_null())
                c.confidence = row["confidence"].get<double>();
            cases.push_back(std::move(c));
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed case manifest: ") + e.what());
    }
    return cases;
}

struct BatchOutcome {
    int completed = 0;
    std::vector<std::string> failures;  // "id: message"
};

/// Fans the cases out over `config.parallelism` workers. Cases share
/// nothing; outputs are written atomically per case, so a parallel run
/// produces byte-identical artifacts to a serial one.
inline BatchOutcome run_batch(const std::vector<CaseInput>& cases, Method method,
                              const RunConfig& config, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);

    BatchOutcome outcome;
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    const int workers = std::max(1, std::min<int>(config.parallelism,
                                                  static_cast<int>(cases.size())));

    auto work = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cases.size())
                return;
            const CaseInput& c = cases[i];
            try {
                BinaryMask mask;
                const CaseRecord record = run_case(c, method, config, &mask);
                const auto base = std::filesystem::path(out_dir) / c.id;
                save_mask(mask, base.string() + "_mask.pgm");
                if (record.stats)
                    save_json_file(run_stats_to_json(*record.stats), base.string() + "_stats.json");
                save_json_file(case_record_to_json(record), base.string() + "_record.json");
                std::lock_guard<std::mutex> lock(mu);
                ++outcome.completed;
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(mu);
                outcome.failures.push_back(c.id + ": " + e.what());
            }
        }
    };

    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w)
            pool.emplace_back(work);
        for (auto& t : pool)
            t.join();
    }
    return outcome;
}

struct MethodAggregate {
    int cases = 0;           // records carrying a report
    SegReport mean;          // psnr averaged over the finite entries only
    int psnr_inf_count = 0;
    int psnr_finite_count = 0;
};

inline std::vector<CaseRecord> load_records(const std::string& records_dir) {
    std::vector<CaseRecord> records;
    if (!std::filesystem::is_directory(records_dir))
        throw IoError("not a directory: " + records_dir);
    std::vector<std::string> paths;
    for (const auto& entry : std::filesystem::directory_iterator(records_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json" &&
            entry.path().stem().string().ends_with("_record"))
            paths.push_back(entry.path().string());
    std::sort(paths.begin(), paths.end());
    for (const auto& p : paths)
        records.push_back(case_record_from_json(load_json_file(p)));
    std::sort(records.begin(), records.end(),
              [](const CaseRecord& a, const CaseRecord& b) { return a.id < b.id; });
    return records;
}

/// Arithmetic means of every report field per method. Infinite PSNR entries
/// are excluded from the mean and counted separately.
inline std::map<std::string, MethodAggregate> aggregate_records(
    const std::vector<CaseRecord>& records) {
    std::map<std::string, MethodAggregate> agg;
    for (const CaseRecord& r : records) {
        if (!r.report)
            continue;
        MethodAggregate& a = agg[method_name(r.method)];
        ++a.cases;
        a.mean.dice += r.report->dice;
        a.mean.accuracy += r.report->accuracy;
        a.mean.ri += r.report->ri;
        a.mean.voi += r.report->voi;
        a.mean.gce += r.report->gce;
        a.mean.bde += r.report->bde;
        a.mean.mae += r.report->mae;
        if (std::isinf(r.report->psnr))
            ++a.psnr_inf_count;
        else {
            a.mean.psnr += r.report->psnr;
            ++a.psnr_finite_count;
        }
    }
    for (auto& [name, a] : agg) {
        const double n = a.cases;
        a.mean.dice /= n;
        a.mean.accuracy /= n;
        a.mean.ri /= n;
        a.mean.voi /= n;
        a.mean.gce /= n;
        a.mean.bde /= n;
        a.mean.mae /= n;
        a.mean.psnr = a.psnr_finite_count > 0
                          ? a.mean.psnr / a.psnr_finite_count
                          : std::numeric_limits<double>::infinity();
    }
    return agg;
}

}  // namespace pipeline
}  // namespace segkit
