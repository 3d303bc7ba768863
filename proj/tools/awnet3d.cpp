#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "awnet/config.hpp"
#include "awnet/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

int run(int argc, char** argv) {
    CLI::App app{"awnet3d: unsupervised 3D segmentation with an attention W-Net"};
    app.require_subcommand(1);

    // phantom-gen
    auto* gen = app.add_subcommand("phantom-gen", "Generate a synthetic phantom volume");
    std::string gen_spec, gen_out_dir;
    gen->add_option("--spec", gen_spec, "Phantom spec file")->required();
    gen->add_option("--out-dir", gen_out_dir, "Output directory")->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "Train the W-Net on a volume directory");
    std::string train_config;
    train_cmd->add_option("--config", train_config, "Pipeline config file")->required();

    // segment
    auto* seg = app.add_subcommand("segment", "Encoder-only segmentation of one volume");
    std::string seg_ckpt, seg_in, seg_out_dir;
    seg->add_option("--ckpt", seg_ckpt, "Checkpoint file")->required();
    seg->add_option("--in", seg_in, "Input .vol3 volume")->required();
    seg->add_option("--out-dir", seg_out_dir, "Output directory")->required();

    // refine
    auto* refine_cmd = app.add_subcommand("refine", "CRF-refine a stored segmentation");
    std::string refine_config, refine_in;
    refine_cmd->add_option("--config", refine_config, "Pipeline config file")->required();
    refine_cmd->add_option("--in", refine_in, "Segmentation directory (from `segment`)")
        ->required();

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "Overlap metrics for merged clusters");
    std::string eval_pred, eval_truth, eval_clusters, eval_report;
    eval_cmd->add_option("--pred", eval_pred, "Predicted .lbl3 label map")->required();
    eval_cmd->add_option("--truth", eval_truth, "Ground-truth .lbl3 label map")->required();
    eval_cmd->add_option("--clusters", eval_clusters, "Comma-separated cluster ids forming the ROI")
        ->required();
    eval_cmd->add_option("--report", eval_report, "Report base path (writes .csv and .json)")
        ->required();

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed()) {
        const awnet::PhantomSpec spec = awnet::load_phantom_spec(gen_spec);
        auto [vol, labels] = awnet::generate_phantom(spec);
        const std::string stem = fs::path(gen_spec).stem().string();
        fs::create_directories(gen_out_dir);
        awnet::save_volume(vol, fs::path(gen_out_dir) / (stem + ".vol3"));
        awnet::save_labels(labels, fs::path(gen_out_dir) / (stem + ".lbl3"));
        std::cout << "wrote " << (fs::path(gen_out_dir) / (stem + ".vol3")).string() << " and "
                  << (fs::path(gen_out_dir) / (stem + ".lbl3")).string() << "\n";
    } else if (train_cmd->parsed()) {
        const auto cfg = awnet::PipelineConfig::load(train_config);
        if (cfg.train_dir.empty() || cfg.out_dir.empty())
            throw awnet::config_error("train requires train.volumes_dir and train.out_dir");
        const awnet::TrainResult r = awnet::train(cfg);
        std::cout << "trained " << r.steps_run << " steps, final joint loss "
                  << r.final_joint_loss << "\n"
                  << "checkpoint: " << r.checkpoint_path.string() << "\n"
                  << "loss log: " << r.loss_csv_path.string() << "\n";
    } else if (seg->parsed()) {
        awnet::WNet net = awnet::WNet::load(seg_ckpt);
        const awnet::Volume v = awnet::load_volume(seg_in);
        const awnet::SegmentResult result = awnet::segment_volume(net, v);
        awnet::write_segmentation(result, seg_out_dir);
        std::cout << "wrote segmentation for " << seg_in << " to " << seg_out_dir << "\n";
    } else if (refine_cmd->parsed()) {
        const auto cfg = awnet::PipelineConfig::load(refine_config);
        awnet::refine_segmentation(refine_in, cfg.crf);
        std::cout << "wrote refined_prob_<k>.vol3 and refined_labels.lbl3 in " << refine_in
                  << "\n";
    } else if (eval_cmd->parsed()) {
        const awnet::LabelMap pred = awnet::load_labels(eval_pred);
        const awnet::LabelMap truth = awnet::load_labels(eval_truth);
        awnet::ClusterSelection sel;
        for (int id : awnet::parse_int_list("--clusters", eval_clusters))
            sel.ids.insert(id);
        const awnet::MetricsReport report = awnet::evaluate_segmentation(
            pred, sel, awnet::foreground_mask(truth), fs::path(eval_pred).stem().string());
        awnet::write_report(report, eval_report);
        std::cout << "iou " << report.rows[0].iou << " dice " << report.rows[0].dice << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
