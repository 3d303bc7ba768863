#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "awnet/config.hpp"
#include "awnet/evalseg.hpp"
#include "awnet/wnet.hpp"

namespace awnet {

/// First-order adaptive optimizer (Adam) over a contiguous parameter range.
class Adam {
public:
    Adam(std::size_t n, double step_size, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8);

    /// One update over [begin, end) of the flat parameter vector.
    void step(std::vector<double>& params, const std::vector<double>& grads,
              std::size_t begin, std::size_t end);

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<double> m_, v_;
};

std::uint64_t volume_content_hash(const Volume& v);

/// Affinity graph with a per-volume disk cache keyed by the volume content
/// hash and the affinity parameters.
AffinityGraph cached_affinity(const Volume& v, const AffinityParams& p,
                              const std::filesystem::path& cache_dir);

struct TrainResult {
    std::filesystem::path checkpoint_path;
    std::filesystem::path loss_csv_path;
    int steps_run = 0;
    double final_joint_loss = 0.0;
};

/// Full training loop: per volume (batch of one) normalize, build/fetch the
/// affinity graph, run the W-Net, take a gradient step on the joint (or
/// alternating) objective. Logs one CSV row per step and checkpoints every
/// epoch. Throws on unreadable volumes and on non-finite losses.
TrainResult train(const PipelineConfig& cfg);

struct SegmentResult {
    Volume normalized;
    Tensor assignment;
    LabelMap labels;
};

/// Encoder-only inference plus argmax labels.
SegmentResult segment_volume(WNet& net, const Volume& v);

/// Directory layout: input.vol3, prob_<k>.vol3 per class, labels.lbl3
/// (refined_* variants after CRF refinement).
void write_segmentation(const SegmentResult& seg, const std::filesystem::path& dir);
SegmentResult read_segmentation(const std::filesystem::path& dir);

/// mean_field + map_labels over a stored segmentation directory.
LabelMap refine_segmentation(const std::filesystem::path& dir, const CRFParams& params);

/// merge_clusters + overlap metrics against a binary truth.
MetricsReport evaluate_segmentation(const LabelMap& pred, const ClusterSelection& sel,
                                    const Mask& truth, const std::string& volume_id);

/// Volumes of a directory with the ".vol3" extension, sorted by filename.
std::vector<std::filesystem::path> list_volumes(const std::filesystem::path& dir);

} // namespace awnet
