#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "awnet/pipeline.hpp"
#include "test_helpers.hpp"

using namespace awnet;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "awnet_test_pipeline" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

PhantomSpec two_intensity_spec(Dims dims, std::uint64_t seed) {
    PhantomSpec spec;
    spec.dims = dims;
    spec.background_intensity = 0.2;
    spec.ellipsoids.push_back({dims.d / 2.0, dims.h / 2.0, dims.w / 2.0,
                               dims.d / 3.0, dims.h / 3.0, dims.w / 3.0, 0.8, 1});
    spec.noise_sigma = 0.01;
    spec.seed = seed;
    return spec;
}

void write_phantom(const PhantomSpec& spec, const fs::path& path) {
    auto [vol, labels] = generate_phantom(spec);
    save_volume(vol, path);
}

PipelineConfig tiny_config(const fs::path& vol_dir, const fs::path& out_dir) {
    PipelineConfig cfg;
    cfg.network.depth = 1;
    cfg.network.base_channels = 2;
    cfg.network.k_classes = 2;
    cfg.network.seed = 5;
    cfg.seed = 5;
    cfg.affinity.radius = 2;
    cfg.affinity.sigma_i = 0.3;
    cfg.optimizer.steps = 2;
    cfg.train_dir = vol_dir;
    cfg.out_dir = out_dir;
    return cfg;
}

std::vector<std::string> read_lines(const fs::path& path) {
    std::ifstream in(path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line))
        lines.push_back(line);
    return lines;
}

std::string read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

} // namespace

TEST_CASE("adam leaves parameters untouched under zero gradients") {
    Adam adam(4, 1e-2);
    std::vector<double> params = {1.0, -2.0, 0.5, 3.0};
    const std::vector<double> grads(4, 0.0);
    const auto before = params;
    for (int i = 0; i < 10; ++i)
        adam.step(params, grads, 0, 4);
    CHECK(params == before);
}

TEST_CASE("adam descends a quadratic") {
    Adam adam(1, 1e-1);
    std::vector<double> x = {3.0};
    std::vector<double> g(1);
    for (int i = 0; i < 200; ++i) {
        g[0] = 2.0 * x[0];
        adam.step(x, g, 0, 1);
    }
    CHECK(std::abs(x[0]) < 0.1);
}

TEST_CASE("volume hash distinguishes content and matches itself") {
    const Volume a = testutil::random_volume(Dims{4, 4, 4}, 1);
    Volume b = a;
    CHECK(volume_content_hash(a) == volume_content_hash(b));
    b.data[7] += 0.25f;
    CHECK(volume_content_hash(a) != volume_content_hash(b));
}

TEST_CASE("affinity cache stores and reuses graphs") {
    const auto dir = fresh_dir("affcache");
    const Volume v = normalize(testutil::random_volume(Dims{5, 5, 5}, 2));
    AffinityParams p;
    p.radius = 2;
    const AffinityGraph g1 = cached_affinity(v, p, dir);
    // exactly one cache file appears
    int files = 0;
    for (const auto& e : fs::directory_iterator(dir))
        files += e.is_regular_file();
    CHECK(files == 1);
    const AffinityGraph g2 = cached_affinity(v, p, dir);
    REQUIRE(g2.edges.size() == g1.edges.size());
    for (std::size_t i = 0; i < g1.edges.size(); ++i)
        CHECK(g1.edges[i].w == g2.edges[i].w);

    // different parameters get their own cache entry
    AffinityParams p2 = p;
    p2.sigma_i = 0.25;
    cached_affinity(v, p2, dir);
    files = 0;
    for (const auto& e : fs::directory_iterator(dir))
        files += e.is_regular_file();
    CHECK(files == 2);
}

TEST_CASE("one epoch over two tiny phantoms logs two rows and a checkpoint") {
    const auto vols = fresh_dir("epoch_vols");
    const auto out = fresh_dir("epoch_out");
    write_phantom(two_intensity_spec(Dims{6, 6, 6}, 1), vols / "a.vol3");
    write_phantom(two_intensity_spec(Dims{6, 6, 6}, 2), vols / "b.vol3");

    const PipelineConfig cfg = tiny_config(vols, out);
    const TrainResult r = train(cfg);
    CHECK(r.steps_run == 2);
    CHECK(fs::exists(r.checkpoint_path));

    const auto lines = read_lines(r.loss_csv_path);
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "step,J_soft_ncut,J_rec,J_total");
    CHECK(lines[1].substr(0, 2) == "1,");
    CHECK(lines[2].substr(0, 2) == "2,");
}

TEST_CASE("zero reconstruction weight leaves the decoder bit-unchanged") {
    const auto vols = fresh_dir("frozen_vols");
    const auto out = fresh_dir("frozen_out");
    write_phantom(two_intensity_spec(Dims{6, 6, 6}, 3), vols / "a.vol3");

    PipelineConfig cfg = tiny_config(vols, out);
    cfg.loss.rec = 0.0;
    cfg.optimizer.steps = 4;
    const TrainResult r = train(cfg);

    WNet trained = WNet::load(r.checkpoint_path);
    WNet reference(cfg.network);
    reference.init_params();

    const auto& a = trained.params().data();
    const auto& b = reference.params().data();
    const std::size_t dec = trained.decoder_param_begin();
    bool decoder_identical = true;
    for (std::size_t i = dec; i < a.size(); ++i)
        decoder_identical = decoder_identical && a[i] == b[i];
    CHECK(decoder_identical);
    // while the encoder did move
    double enc_change = 0.0;
    for (std::size_t i = 0; i < dec; ++i)
        enc_change += std::abs(a[i] - b[i]);
    CHECK(enc_change > 0.0);
}

TEST_CASE("thirty steps on a two-intensity phantom reduce the joint loss") {
    const auto vols = fresh_dir("descent_vols");
    const auto out = fresh_dir("descent_out");
    write_phantom(two_intensity_spec(Dims{16, 16, 16}, 4), vols / "a.vol3");

    PipelineConfig cfg;
    cfg.network.depth = 2;
    cfg.network.base_channels = 4;
    cfg.network.k_classes = 3;
    cfg.network.seed = 9;
    cfg.seed = 9;
    cfg.affinity.radius = 2;
    cfg.optimizer.steps = 30;
    cfg.optimizer.step_size = 3e-3;
    cfg.train_dir = vols;
    cfg.out_dir = out;
    const TrainResult r = train(cfg);

    const auto lines = read_lines(r.loss_csv_path);
    REQUIRE(lines.size() == 31);
    const auto total_of = [](const std::string& line) {
        const auto pos = line.rfind(',');
        return std::stod(line.substr(pos + 1));
    };
    const double first = total_of(lines[1]);
    const double last = total_of(lines[30]);
    CHECK(last < first);

    SUBCASE("segmenting the training phantom yields finite, in-range outputs") {
        WNet net = WNet::load(r.checkpoint_path);
        const Volume vol = load_volume(vols / "a.vol3");
        const SegmentResult seg = segment_volume(net, vol);
        CHECK(seg.assignment.c == 3);
        CHECK(seg.labels.dims == vol.dims);
        for (double v : seg.assignment.v)
            CHECK(std::isfinite(v));
        for (auto l : seg.labels.labels)
            CHECK(l < 3);
        for (float v : seg.normalized.data)
            CHECK(std::isfinite(v));
    }
}

TEST_CASE("training twice with the same seed reproduces the loss CSV byte-identically") {
    const auto vols = fresh_dir("repro_vols");
    write_phantom(two_intensity_spec(Dims{6, 6, 6}, 5), vols / "a.vol3");
    write_phantom(two_intensity_spec(Dims{6, 6, 6}, 6), vols / "b.vol3");

    const auto out1 = fresh_dir("repro_out1");
    const auto out2 = fresh_dir("repro_out2");
    PipelineConfig cfg = tiny_config(vols, out1);
    cfg.optimizer.steps = 6;
    const TrainResult r1 = train(cfg);
    cfg.out_dir = out2;
    const TrainResult r2 = train(cfg);
    CHECK(read_bytes(r1.loss_csv_path) == read_bytes(r2.loss_csv_path));
    CHECK(read_bytes(r1.checkpoint_path) == read_bytes(r2.checkpoint_path));
}

TEST_CASE("segment is idempotent and round-trips through the directory format") {
    const auto vols = fresh_dir("seg_vols");
    const auto out = fresh_dir("seg_out");
    write_phantom(two_intensity_spec(Dims{6, 6, 6}, 7), vols / "a.vol3");
    PipelineConfig cfg = tiny_config(vols, out);
    const TrainResult r = train(cfg);

    WNet net = WNet::load(r.checkpoint_path);
    const Volume vol = load_volume(vols / "a.vol3");
    const SegmentResult s1 = segment_volume(net, vol);
    const SegmentResult s2 = segment_volume(net, vol);
    CHECK(s1.assignment.v == s2.assignment.v);
    CHECK(s1.labels == s2.labels);

    const auto seg_dir = out / "seg";
    write_segmentation(s1, seg_dir);
    CHECK(fs::exists(seg_dir / "input.vol3"));
    CHECK(fs::exists(seg_dir / "prob_0.vol3"));
    CHECK(fs::exists(seg_dir / "prob_1.vol3"));
    CHECK(fs::exists(seg_dir / "labels.lbl3"));
    const SegmentResult back = read_segmentation(seg_dir);
    CHECK(back.labels == s1.labels);
    CHECK(back.assignment.c == s1.assignment.c);
    // probabilities survive the f32 narrowing within float precision
    for (std::size_t i = 0; i < back.assignment.size(); ++i)
        CHECK(std::abs(back.assignment.v[i] - s1.assignment.v[i]) < 1e-6);
}

TEST_CASE("refine with zero pairwise weights keeps the argmax labels") {
    const auto vols = fresh_dir("refine_vols");
    const auto out = fresh_dir("refine_out");
    write_phantom(two_intensity_spec(Dims{6, 6, 6}, 8), vols / "a.vol3");
    PipelineConfig cfg = tiny_config(vols, out);
    const TrainResult r = train(cfg);

    WNet net = WNet::load(r.checkpoint_path);
    const SegmentResult seg = segment_volume(net, load_volume(vols / "a.vol3"));
    const auto seg_dir = out / "seg";
    write_segmentation(seg, seg_dir);

    CRFParams crf;
    crf.w_smooth = 0.0;
    crf.w_appear = 0.0;
    const LabelMap refined = refine_segmentation(seg_dir, crf);
    CHECK(refined == seg.labels);
    CHECK(fs::exists(seg_dir / "refined_labels.lbl3"));
    CHECK(fs::exists(seg_dir / "refined_prob_0.vol3"));
    CHECK(load_labels(seg_dir / "refined_labels.lbl3") == refined);
}

TEST_CASE("evaluate wraps merge + metrics") {
    LabelMap pred(Dims{1, 1, 4});
    pred.labels = {0, 1, 2, 1};
    LabelMap truth(Dims{1, 1, 4});
    truth.labels = {0, 1, 1, 0};
    const MetricsReport report = evaluate_segmentation(
        pred, ClusterSelection{{1, 2}}, foreground_mask(truth), "t");
    REQUIRE(report.rows.size() == 1);
    // pred mask 0111, truth mask 0110: intersection 2, union 3
    CHECK(report.rows[0].iou == doctest::Approx(2.0 / 3.0));
    CHECK(report.rows[0].dice == doctest::Approx(4.0 / 5.0));
}

TEST_CASE("train reports missing volume directories and empty ones") {
    PipelineConfig cfg = tiny_config("/definitely/not/here", fresh_dir("err_out"));
    CHECK_THROWS_AS(train(cfg), invalid_argument_error);
    cfg.train_dir = fresh_dir("err_empty");
    CHECK_THROWS_AS(train(cfg), invalid_argument_error);
}
