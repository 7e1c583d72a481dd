#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "segkit/json_io.hpp"
#include "segkit/metrics.hpp"
#include "segkit/phantom.hpp"
#include "segkit/pipeline.hpp"

#include "test_util.hpp"

using namespace segkit;

namespace {

const std::string kCli = SEGKIT_CLI_PATH;

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

RunResult run_cli(const std::string& args, const testutil::TempDir& dir,
                  const std::string& env = "") {
    const std::string out_file = dir.file("cli_stdout.txt");
    const std::string err_file = dir.file("cli_stderr.txt");
    const std::string cmd =
        env + kCli + " " + args + " > " + out_file + " 2> " + err_file;
    const int status = std::system(cmd.c_str());

    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    auto slurp = [](const std::string& path) {
        std::ifstream in(path);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    return r;
}

json disk_spec_json(double sigma, std::uint64_t seed) {
    PhantomSpec spec = PhantomSpec::disk(512, 512, 256, 256, 40);
    spec.fg_intensity = 0.7;
    spec.bg_intensity = 0.2;
    spec.noise_sigma = sigma;
    spec.seed = seed;
    return phantom_spec_to_json(spec);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST(CliPhantom, WritesDeterministicTriple) {
    testutil::TempDir dir("cli_phantom");
    save_json_file(disk_spec_json(0.1, 42), dir.file("spec.json"));

    const auto a = run_cli("phantom --spec " + dir.file("spec.json") + " --out " + dir.file("a"), dir);
    ASSERT_EQ(a.exit_code, 0) << a.err;
    const auto b = run_cli("phantom --spec " + dir.file("spec.json") + " --out " + dir.file("b"), dir);
    ASSERT_EQ(b.exit_code, 0) << b.err;

    for (const char* name : {"image.pgm", "mask.pgm", "bbox.json"}) {
        const std::string fa = read_file(dir.file("a/") + name);
        EXPECT_FALSE(fa.empty());
        EXPECT_EQ(fa, read_file(dir.file("b/") + name)) << name;
    }

    const BoundingBox box = bbox_from_json(load_json_file(dir.file("a/bbox.json")));
    EXPECT_EQ(box.frame.kind, Frame::Kind::native512);
    EXPECT_GT(box.w, 70);  // tight box around a radius-40 disk
    EXPECT_LT(box.w, 90);
}

TEST(CliPhantom, SeedFlagOverridesSpec) {
    testutil::TempDir dir("cli_seed");
    save_json_file(disk_spec_json(0.1, 42), dir.file("spec.json"));
    const auto a = run_cli("phantom --spec " + dir.file("spec.json") + " --out " + dir.file("a") +
                               " --seed 7",
                           dir);
    ASSERT_EQ(a.exit_code, 0) << a.err;
    const auto b = run_cli("phantom --spec " + dir.file("spec.json") + " --out " + dir.file("b"), dir);
    ASSERT_EQ(b.exit_code, 0) << b.err;
    EXPECT_NE(read_file(dir.file("a/image.pgm")), read_file(dir.file("b/image.pgm")));
}

TEST(CliSegment, EndToEndPhantomCase) {
    testutil::TempDir dir("cli_segment");
    save_json_file(disk_spec_json(0.1, 11), dir.file("spec.json"));
    ASSERT_EQ(run_cli("phantom --spec " + dir.file("spec.json") + " --out " + dir.file("ph"), dir)
                  .exit_code, 0);

    const auto r = run_cli("segment --image " + dir.file("ph/image.pgm") + " --bbox " +
                               dir.file("ph/bbox.json") + " --truth " + dir.file("ph/mask.pgm") +
                               " --id case1 --method chanvese --overlay --out " + dir.file("out"),
                           dir);
    ASSERT_EQ(r.exit_code, 0) << r.err;

    const BinaryMask mask = load_mask(dir.file("out/case1_mask.pgm"));
    const BinaryMask truth = load_mask(dir.file("ph/mask.pgm"));
    EXPECT_GE(dice(confusion(mask, truth)), 0.95);

    const json stats = load_json_file(dir.file("out/case1_stats.json"));
    EXPECT_TRUE(stats.contains("iterations") && stats.contains("converged") &&
                stats.contains("c1") && stats.contains("c2"));
    EXPECT_LE(stats["iterations"].get<int>(), 100);

    const auto record = pipeline::case_record_from_json(load_json_file(dir.file("out/case1_record.json")));
    ASSERT_TRUE(record.report.has_value());
    EXPECT_GE(record.report->dice, 0.95);

    // overlay exists and loads as a grayscale image of the same size
    const GrayImage overlay = load_image(dir.file("out/case1_overlay.png"));
    EXPECT_EQ(overlay.width, 512);
    EXPECT_EQ(overlay.height, 512);
}

TEST(CliSegment, DownsampledBoxIsMappedToNative) {
    testutil::TempDir dir("cli_map");
    save_json_file(disk_spec_json(0.05, 13), dir.file("spec.json"));
    ASSERT_EQ(run_cli("phantom --spec " + dir.file("spec.json") + " --out " + dir.file("ph"), dir)
                  .exit_code, 0);

    const BoundingBox native = bbox_from_json(load_json_file(dir.file("ph/bbox.json")));
    BoundingBox small;
    small.x = native.x / 4;
    small.y = native.y / 4;
    small.w = native.w / 4;
    small.h = native.h / 4;
    small.frame = Frame::downsampled128();
    save_json_file(bbox_to_json(small), dir.file("bbox128.json"));

    const auto r = run_cli("segment --image " + dir.file("ph/image.pgm") + " --bbox " +
                               dir.file("bbox128.json") + " --truth " + dir.file("ph/mask.pgm") +
                               " --id mapped --out " + dir.file("out"),
                           dir);
    ASSERT_EQ(r.exit_code, 0) << r.err;

    const auto record = pipeline::case_record_from_json(load_json_file(dir.file("out/mapped_record.json")));
    EXPECT_EQ(record.bbox.frame.kind, Frame::Kind::native512);
    EXPECT_NEAR(record.bbox.x, native.x, 2);  // x4 rounding slack
    ASSERT_TRUE(record.report.has_value());
    EXPECT_GE(record.report->dice, 0.9);
}

TEST(CliSegment, MissingBboxFails) {
    testutil::TempDir dir("cli_missing");
    save_json_file(disk_spec_json(0.0, 1), dir.file("spec.json"));
    ASSERT_EQ(run_cli("phantom --spec " + dir.file("spec.json") + " --out " + dir.file("ph"), dir)
                  .exit_code, 0);
    const auto r = run_cli("segment --image " + dir.file("ph/image.pgm") + " --bbox " +
                               dir.file("nonexistent.json") + " --id broken --out " + dir.file("out"),
                           dir);
    EXPECT_NE(r.exit_code, 0);
    EXPECT_FALSE(r.err.empty());
    EXPECT_FALSE(std::filesystem::exists(dir.file("out/broken_mask.pgm")));
}

TEST(CliSegment, ConfigFileCapsIterations) {
    testutil::TempDir dir("cli_config");
    save_json_file(disk_spec_json(0.1, 17), dir.file("spec.json"));
    ASSERT_EQ(run_cli("phantom --spec " + dir.file("spec.json") + " --out " + dir.file("ph"), dir)
                  .exit_code, 0);

    const json config{{"acwe", {{"iterations", 3}, {"smoothing_passes", 2}}}, {"parallelism", 1}};
    save_json_file(config, dir.file("config.json"));

    const auto r = run_cli("segment --image " + dir.file("ph/image.pgm") + " --bbox " +
                               dir.file("ph/bbox.json") + " --id capped --config " +
                               dir.file("config.json") + " --out " + dir.file("out"),
                           dir);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const json stats = load_json_file(dir.file("out/capped_stats.json"));
    EXPECT_LE(stats["iterations"].get<int>(), 3);
}

TEST(CliEvaluate, IdentityReport) {
    testutil::TempDir dir("cli_eval");
    save_json_file(disk_spec_json(0.0, 1), dir.file("spec.json"));
    ASSERT_EQ(run_cli("phantom --spec " + dir.file("spec.json") + " --out " + dir.file("ph"), dir)
                  .exit_code, 0);

    const auto r = run_cli("evaluate --pred " + dir.file("ph/mask.pgm") + " --truth " +
                               dir.file("ph/mask.pgm"),
                           dir);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const json report = json::parse(r.out);
    EXPECT_DOUBLE_EQ(report["dice"].get<double>(), 1.0);
    EXPECT_DOUBLE_EQ(report["ri"].get<double>(), 1.0);
    EXPECT_DOUBLE_EQ(report["voi"].get<double>(), 0.0);
    EXPECT_EQ(report["psnr"], "inf");
}

TEST(CliEvaluate, MatchesLibraryOnDistinctMasks) {
    testutil::TempDir dir("cli_eval2");
    std::mt19937 rng(13);
    const BinaryMask pred = testutil::random_mask(32, 32, rng);
    const BinaryMask truth = testutil::random_mask(32, 32, rng);
    save_mask(pred, dir.file("pred.png"));
    save_mask(truth, dir.file("truth.png"));

    const auto r = run_cli("evaluate --pred " + dir.file("pred.png") + " --truth " +
                               dir.file("truth.png"),
                           dir);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const SegReport from_cli = seg_report_from_json(json::parse(r.out));
    const SegReport expected = evaluate_pair(pred, truth);
    EXPECT_DOUBLE_EQ(from_cli.dice, expected.dice);
    EXPECT_DOUBLE_EQ(from_cli.voi, expected.voi);
    EXPECT_DOUBLE_EQ(from_cli.bde, expected.bde);
    EXPECT_DOUBLE_EQ(from_cli.mae, expected.mae);
}

TEST(CliEvaluate, MalformedMaskFails) {
    testutil::TempDir dir("cli_eval3");
    std::ofstream(dir.file("junk.pgm")) << "not an image";
    const auto r = run_cli("evaluate --pred " + dir.file("junk.pgm") + " --truth " +
                               dir.file("junk.pgm"),
                           dir);
    EXPECT_NE(r.exit_code, 0);
    EXPECT_FALSE(r.err.empty());
}

TEST(CliBatchAndReport, ParallelRunsAreByteIdentical) {
    testutil::TempDir dir("cli_batch");
    json manifest = json::array();
    for (int i = 0; i < 4; ++i) {
        PhantomSpec spec = PhantomSpec::disk(256, 256, 128, 128, 25 + 2 * i);
        spec.noise_sigma = 0.1;
        spec.seed = 100 + i;
        const PhantomResult ph = generate(spec);
        const std::string tag = "case" + std::to_string(i);
        save_image(ph.image, dir.file(tag + ".pgm"));
        save_mask(ph.mask, dir.file(tag + "_truth.pgm"));
        json row{{"id", tag},
                 {"image", dir.file(tag + ".pgm")},
                 {"bbox", bbox_to_json(ph.bbox)},
                 {"truth", dir.file(tag + "_truth.pgm")},
                 {"confidence", 0.9 + 0.01 * i}};
        manifest.push_back(row);
    }
    save_json_file(manifest, dir.file("cases.json"));

    const auto serial = run_cli("segment --cases " + dir.file("cases.json") + " --jobs 1 --out " +
                                    dir.file("serial"),
                                dir);
    ASSERT_EQ(serial.exit_code, 0) << serial.err;
    const auto parallel = run_cli("segment --cases " + dir.file("cases.json") +
                                      " --jobs 4 --out " + dir.file("parallel"),
                                  dir);
    ASSERT_EQ(parallel.exit_code, 0) << parallel.err;

    for (int i = 0; i < 4; ++i) {
        const std::string tag = "case" + std::to_string(i);
        EXPECT_EQ(read_file(dir.file("serial/" + tag + "_mask.pgm")),
                  read_file(dir.file("parallel/" + tag + "_mask.pgm")));
        EXPECT_EQ(read_file(dir.file("serial/" + tag + "_record.json")),
                  read_file(dir.file("parallel/" + tag + "_record.json")));
    }

    const auto report = run_cli("report --records " + dir.file("serial") + " --out " +
                                    dir.file("rep"),
                                dir);
    ASSERT_EQ(report.exit_code, 0) << report.err;
    EXPECT_NE(report.out.find("dice"), std::string::npos);
    EXPECT_NE(report.out.find("chanvese"), std::string::npos);

    const json agg = load_json_file(dir.file("rep/report.json"));
    ASSERT_TRUE(agg["aggregate"].contains("chanvese"));
    EXPECT_EQ(agg["aggregate"]["chanvese"]["cases"].get<int>(), 4);
    EXPECT_EQ(agg["cases"].size(), 4u);

    // records carry the pass-through confidence
    EXPECT_DOUBLE_EQ(agg["cases"][0]["confidence"].get<double>(), 0.9);
}

TEST(CliReport, SingleRecordAggregateEqualsRecord) {
    testutil::TempDir dir("cli_rep1");
    std::mt19937 rng(19);
    const BinaryMask pred = testutil::random_mask(24, 24, rng);
    const BinaryMask truth = testutil::random_mask(24, 24, rng);

    pipeline::CaseRecord record;
    record.id = "only";
    record.image_path = "unused.pgm";
    record.bbox = BoundingBox{0, 0, 10, 10, Frame::custom(24, 24)};
    record.method = pipeline::Method::prewitt;
    record.report = evaluate_pair(pred, truth);
    std::filesystem::create_directories(dir.file("records"));
    save_json_file(pipeline::case_record_to_json(record), dir.file("records/only_record.json"));

    const auto r = run_cli("report --records " + dir.file("records") + " --out " + dir.file("rep"),
                           dir);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const json agg = load_json_file(dir.file("rep/report.json"));
    EXPECT_DOUBLE_EQ(agg["aggregate"]["prewitt"]["dice"].get<double>(), record.report->dice);
    EXPECT_DOUBLE_EQ(agg["aggregate"]["prewitt"]["bde"].get<double>(), record.report->bde);
}

TEST(CliReport, EmptyDirectoryFails) {
    testutil::TempDir dir("cli_rep2");
    std::filesystem::create_directories(dir.file("empty"));
    const auto r = run_cli("report --records " + dir.file("empty"), dir);
    EXPECT_NE(r.exit_code, 0);
}

TEST(CliRpnDemo, DefaultListingHasNineAnchors) {
    testutil::TempDir dir("cli_rpn");
    const auto r = run_cli("rpn-demo", dir);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const json out = json::parse(r.out);
    EXPECT_EQ(out["anchors"].size(), 9u);
    EXPECT_DOUBLE_EQ(out["anchors"][0]["cx"].get<double>(), 320.0);
}

TEST(CliRpnDemo, WorkedLossExample) {
    testutil::TempDir dir("cli_rpn2");
    const json batch{{"anchors", {{{"cx", 0.0}, {"cy", 0.0}, {"w", 10.0}, {"h", 10.0}}}},
                     {"labels", {"positive"}},
                     {"scores", {0.5}},
                     {"t", {{0.5, 0.0, 0.0, 0.0}}},
                     {"t_star", {{0.0, 0.0, 0.0, 0.0}}},
                     {"lambda", 10.0},
                     {"n_cls", 1},
                     {"n_reg", 1}};
    save_json_file(batch, dir.file("batch.json"));
    const auto r = run_cli("rpn-demo --batch " + dir.file("batch.json"), dir);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const json out = json::parse(r.out);
    EXPECT_NEAR(out["loss"]["total"].get<double>(), 1.9431, 1e-4);
    EXPECT_NEAR(out["loss"]["cls"].get<double>(), 0.6931, 1e-4);
    EXPECT_NEAR(out["loss"]["reg"].get<double>(), 1.25, 1e-12);
}

TEST(CliRpnDemo, AllNegativeBatchHasZeroRegression) {
    testutil::TempDir dir("cli_rpn3");
    json batch;
    batch["anchors"] = json::array();
    batch["labels"] = json::array();
    batch["scores"] = json::array();
    batch["t"] = json::array();
    batch["t_star"] = json::array();
    for (int i = 0; i < 5; ++i) {
        batch["anchors"].push_back({{"cx", i * 30.0}, {"cy", 0.0}, {"w", 10.0}, {"h", 10.0}});
        batch["labels"].push_back("negative");
        batch["scores"].push_back(0.25);
        batch["t"].push_back({1.0, 2.0, 3.0, 4.0});
        batch["t_star"].push_back(nullptr);
    }
    save_json_file(batch, dir.file("batch.json"));
    const auto r = run_cli("rpn-demo --batch " + dir.file("batch.json"), dir);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const json out = json::parse(r.out);
    EXPECT_DOUBLE_EQ(out["loss"]["reg"].get<double>(), 0.0);
}

TEST(CliRpnDemo, MalformedBatchFails) {
    testutil::TempDir dir("cli_rpn4");
    std::ofstream(dir.file("bad.json")) << "{ not json";
    const auto r = run_cli("rpn-demo --batch " + dir.file("bad.json"), dir);
    EXPECT_NE(r.exit_code, 0);
}

TEST(CliLogging, EnvVarControlsVerbosity) {
    testutil::TempDir dir("cli_log");
    save_json_file(disk_spec_json(0.0, 5), dir.file("spec.json"));
    ASSERT_EQ(run_cli("phantom --spec " + dir.file("spec.json") + " --out " + dir.file("ph"), dir)
                  .exit_code, 0);

    const BoundingBox native = bbox_from_json(load_json_file(dir.file("ph/bbox.json")));
    BoundingBox small{native.x / 4, native.y / 4, native.w / 4, native.h / 4,
                      Frame::downsampled128()};
    save_json_file(bbox_to_json(small), dir.file("bbox128.json"));

    const std::string args = "segment --image " + dir.file("ph/image.pgm") + " --bbox " +
                             dir.file("bbox128.json") + " --id log --out " + dir.file("out");
    const auto verbose = run_cli(args, dir, "SEG_LOG_LEVEL=debug ");
    ASSERT_EQ(verbose.exit_code, 0) << verbose.err;
    EXPECT_NE(verbose.err.find("[debug]"), std::string::npos);

    const auto quiet = run_cli(args, dir, "SEG_LOG_LEVEL=error ");
    ASSERT_EQ(quiet.exit_code, 0) << quiet.err;
    EXPECT_EQ(quiet.err.find("[debug]"), std::string::npos);
}
