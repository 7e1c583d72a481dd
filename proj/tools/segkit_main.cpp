#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "segkit/json_io.hpp"
#include "segkit/log.hpp"
#include "segkit/phantom.hpp"
#include "segkit/pipeline.hpp"
#include "segkit/rpn.hpp"

namespace {

namespace fs = std::filesystem;
using segkit::json;

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::string method = "chanvese";
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_method = false) {
    cmd->add_option("--config", opts.config_path, "JSON config file (flags override it)");
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--seed", opts.seed, "random seed override");
    cmd->add_option("--jobs", opts.jobs, "worker count for batch runs");
    if (with_method)
        cmd->add_option("--method", opts.method, "chanvese|prewitt|sobel");
}

/// Defaults, then config file, then flags.
segkit::pipeline::RunConfig resolve_config(const CommonOpts& opts) {
    segkit::pipeline::RunConfig config;
    if (!opts.config_path.empty())
        config = segkit::pipeline::config_from_json(segkit::load_json_file(opts.config_path));
    if (opts.seed)
        config.seed = *opts.seed;
    if (opts.jobs)
        config.parallelism = *opts.jobs;
    if (!opts.out_dir.empty())
        config.io.output_dir = opts.out_dir;
    config.require_valid();
    return config;
}

std::string require_out_dir(const segkit::pipeline::RunConfig& config) {
    if (config.io.output_dir.empty())
        throw segkit::ParameterError("an output directory is required (--out)");
    fs::create_directories(config.io.output_dir);
    return config.io.output_dir;
}

int cmd_phantom(const CommonOpts& opts, const std::string& spec_path) {
    const auto config = resolve_config(opts);
    const std::string out_dir = require_out_dir(config);

    segkit::PhantomSpec spec = segkit::phantom_spec_from_json(segkit::load_json_file(spec_path));
    if (opts.seed)
        spec.seed = *opts.seed;
    const segkit::PhantomResult result = segkit::generate(spec);

    const fs::path base(out_dir);
    segkit::save_image(result.image, (base / "image.pgm").string());
    segkit::save_mask(result.mask, (base / "mask.pgm").string());
    segkit::save_json_file(segkit::bbox_to_json(result.bbox), (base / "bbox.json").string());
    segkit::log::info("phantom written to " + out_dir);
    return 0;
}

int cmd_segment(const CommonOpts& opts, const std::string& image_path,
                const std::string& bbox_path, const std::string& cases_path,
                const std::string& truth_path, const std::string& case_id, bool overlay) {
    const auto config = resolve_config(opts);
    const std::string out_dir = require_out_dir(config);
    const auto method = segkit::pipeline::method_from_name(opts.method);

    if (!cases_path.empty()) {
        const auto cases = segkit::pipeline::manifest_from_json(
            segkit::load_json_file(cases_path), fs::path(cases_path).parent_path().string());
        if (cases.empty())
            throw segkit::ParameterError("case manifest is empty");
        const auto outcome = segkit::pipeline::run_batch(cases, method, config, out_dir);
        for (const auto& f : outcome.failures)
            std::cerr << "case failed: " << f << "\n";
        std::cout << outcome.completed << "/" << cases.size() << " cases completed\n";
        return outcome.failures.empty() ? 0 : 1;
    }

    if (image_path.empty() || bbox_path.empty())
        throw segkit::ParameterError("segment needs --image and --bbox (or --cases)");

    segkit::pipeline::CaseInput input;
    input.id = !case_id.empty() ? case_id : fs::path(image_path).stem().string();
    input.image_path = image_path;
    auto [box, confidence] = segkit::pipeline::load_bbox_file(bbox_path);
    input.bbox = box;
    input.confidence = confidence;
    if (!truth_path.empty())
        input.truth_path = truth_path;

    segkit::BinaryMask mask;
    const auto record = segkit::pipeline::run_case(input, method, config, &mask);

    const fs::path base = fs::path(out_dir) / input.id;
    segkit::save_mask(mask, base.string() + "_mask.pgm");
    if (record.stats) {
        const json stats = segkit::run_stats_to_json(*record.stats);
        segkit::save_json_file(stats, base.string() + "_stats.json");
        std::cout << stats.dump(2) << "\n";
    }
    if (record.report || record.truth_path)
        segkit::save_json_file(segkit::pipeline::case_record_to_json(record),
                               base.string() + "_record.json");
    if (overlay) {
        const segkit::GrayImage img = segkit::load_image(image_path);
        segkit::save_image(segkit::pipeline::render_overlay(img, mask),
                           base.string() + "_overlay.png");
    }
    return 0;
}

int cmd_evaluate(const CommonOpts& opts, const std::string& pred_path,
                 const std::string& truth_path, const std::string& out_file) {
    const segkit::BinaryMask pred = segkit::load_mask(pred_path);
    const segkit::BinaryMask truth = segkit::load_mask(truth_path);
    const json report = segkit::seg_report_to_json(segkit::evaluate_pair(pred, truth));
    std::cout << report.dump(2) << "\n";
    if (!out_file.empty())
        segkit::save_json_file(report, out_file);
    (void)opts;
    return 0;
}

std::string format_report_table(const std::vector<segkit::pipeline::CaseRecord>& records,
                                const std::map<std::string, segkit::pipeline::MethodAggregate>& agg) {
    std::ostringstream out;
    auto cell = [](double v) {
        char buf[32];
        if (std::isinf(v))
            std::snprintf(buf, sizeof(buf), "%8s", "inf");
        else
            std::snprintf(buf, sizeof(buf), "%8.4f", v);
        return std::string(buf);
    };
    auto row = [&](const std::string& id, const std::string& method, const segkit::SegReport& r) {
        char head[64];
        std::snprintf(head, sizeof(head), "%-16s %-9s", id.c_str(), method.c_str());
        out << head << cell(r.dice) << cell(r.accuracy) << cell(r.ri) << cell(r.voi)
            << cell(r.gce) << cell(r.bde) << cell(r.psnr) << cell(r.mae) << "\n";
    };
    char head[192];
    std::snprintf(head, sizeof(head), "%-16s %-9s%8s%8s%8s%8s%8s%8s%8s%8s", "case", "method",
                  "dice", "accuracy", "ri", "voi", "gce", "bde", "psnr", "mae");
    out << head << "\n";
    for (const auto& r : records)
        if (r.report)
            row(r.id, segkit::pipeline::method_name(r.method), *r.report);
    for (const auto& [method, a] : agg)
        row("mean(" + std::to_string(a.cases) + ")", method, a.mean);
    return out.str();
}

int cmd_report(const CommonOpts& opts, const std::string& records_dir) {
    const auto records = segkit::pipeline::load_records(records_dir);
    std::size_t with_report = 0;
    for (const auto& r : records)
        with_report += r.report.has_value();
    if (with_report == 0)
        throw segkit::ParameterError("no case records with reports under: " + records_dir);

    const auto agg = segkit::pipeline::aggregate_records(records);
    const std::string table = format_report_table(records, agg);
    std::cout << table;

    json j;
    j["cases"] = json::array();
    for (const auto& r : records)
        j["cases"].push_back(segkit::pipeline::case_record_to_json(r));
    j["aggregate"] = json::object();
    for (const auto& [method, a] : agg) {
        json m{{"cases", a.cases},          {"dice", a.mean.dice}, {"accuracy", a.mean.accuracy},
               {"ri", a.mean.ri},           {"voi", a.mean.voi},   {"gce", a.mean.gce},
               {"bde", a.mean.bde},         {"mae", a.mean.mae},
               {"psnr_inf_count", a.psnr_inf_count}};
        m["psnr"] = a.psnr_finite_count > 0 ? json(a.mean.psnr) : json("inf");
        j["aggregate"][method] = m;
    }

    if (!opts.out_dir.empty()) {
        fs::create_directories(opts.out_dir);
        segkit::save_json_file(j, (fs::path(opts.out_dir) / "report.json").string());
        std::vector<std::uint8_t> bytes(table.begin(), table.end());
        segkit::detail::write_file_bytes((fs::path(opts.out_dir) / "report.txt").string(), bytes);
    }
    return 0;
}

int cmd_rpn_demo(const CommonOpts& opts, const std::string& batch_path, double cx, double cy) {
    json out;
    if (!batch_path.empty()) {
        const auto batch = segkit::anchor_batch_from_json(segkit::load_json_file(batch_path));
        const auto loss = segkit::rpn::rpn_loss(batch);
        out["anchors"] = json::array();
        for (const auto& a : batch.anchors)
            out["anchors"].push_back(segkit::box_to_json(a));
        out["labels"] = json::array();
        for (auto l : batch.labels)
            out["labels"].push_back(segkit::anchor_label_to_json(l));
        out["loss"] = {{"total", loss.total}, {"cls", loss.cls_term}, {"reg", loss.reg_term}};
    } else {
        const auto anchors = segkit::rpn::generate_anchors(cx, cy);
        out["anchors"] = json::array();
        for (const auto& a : anchors)
            out["anchors"].push_back(segkit::box_to_json(a));
    }
    std::cout << out.dump(2) << "\n";
    (void)opts;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bounding-box seeded tumor segmentation toolkit"};
    app.require_subcommand(1);

    CommonOpts opts;

    auto* phantom = app.add_subcommand("phantom", "generate a synthetic image/mask/bbox triple");
    std::string spec_path;
    phantom->add_option("--spec", spec_path, "phantom spec JSON")->required();
    add_common(phantom, opts);

    auto* segment = app.add_subcommand("segment", "segment one image or a case manifest");
    std::string image_path, bbox_path, cases_path, truth_path, case_id;
    bool overlay = false;
    segment->add_option("--image", image_path, "input image (PGM or PNG)");
    segment->add_option("--bbox", bbox_path, "bounding box JSON");
    segment->add_option("--cases", cases_path, "case manifest JSON for batch runs");
    segment->add_option("--truth", truth_path, "ground-truth mask for evaluation");
    segment->add_option("--id", case_id, "case id (defaults to the image stem)");
    segment->add_flag("--overlay", overlay, "write a boundary overlay PNG");
    add_common(segment, opts, true);

    auto* evaluate = app.add_subcommand("evaluate", "score a predicted mask against truth");
    std::string pred_path, eval_truth_path, eval_out;
    evaluate->add_option("--pred", pred_path, "predicted mask")->required();
    evaluate->add_option("--truth", eval_truth_path, "ground-truth mask")->required();
    evaluate->add_option("--report", eval_out, "also write the report JSON here");
    add_common(evaluate, opts);

    auto* report = app.add_subcommand("report", "aggregate case records into a table");
    std::string records_dir;
    report->add_option("--records", records_dir, "directory of *_record.json files")->required();
    add_common(report, opts);

    auto* rpn_demo = app.add_subcommand("rpn-demo", "anchor listing and loss breakdown");
    std::string batch_path;
    double center_x = 320.0, center_y = 320.0;
    rpn_demo->add_option("--batch", batch_path, "anchor batch JSON");
    rpn_demo->add_option("--cx", center_x, "anchor center x (listing mode)");
    rpn_demo->add_option("--cy", center_y, "anchor center y (listing mode)");
    add_common(rpn_demo, opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (phantom->parsed())
            return cmd_phantom(opts, spec_path);
        if (segment->parsed())
            return cmd_segment(opts, image_path, bbox_path, cases_path, truth_path, case_id,
                               overlay);
        if (evaluate->parsed())
            return cmd_evaluate(opts, pred_path, eval_truth_path, eval_out);
        if (report->parsed())
            return cmd_report(opts, records_dir);
        if (rpn_demo->parsed())
            return cmd_rpn_demo(opts, batch_path, center_x, center_y);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
