#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "awnet/volume.hpp"

namespace awnet {

/// Binary region-of-interest mask, one byte (0/1) per voxel.
struct Mask {
    Dims dims;
    std::vector<std::uint8_t> values;

    Mask() = default;
    explicit Mask(Dims dm, std::uint8_t fill = 0)
        : dims(dm), values(dm.count(), fill) {}
};

/// Cluster ids selected (manually, in the paper's workflow) as the region
/// of interest.
struct ClusterSelection {
    std::set<int> ids;
};

/// Voxel is 1 iff its label is in the selection.
Mask merge_clusters(const LabelMap& labels, const ClusterSelection& sel);

/// Binarize a label map: anything nonzero is foreground.
Mask foreground_mask(const LabelMap& labels);

/// |a n b| / |a u b|; 1 when both masks are empty.
double iou(const Mask& a, const Mask& b);

/// 2 |a n b| / (|a| + |b|); 1 when both masks are empty.
double dice(const Mask& a, const Mask& b);

/// Per-volume overlap scores plus volume-averaged and voxel-pooled
/// aggregates (both are emitted since either convention is defensible).
struct MetricsReport {
    struct Row {
        std::string volume_id;
        double iou = 0.0;
        double dice = 0.0;
        // raw counts feed the pooled aggregate
        std::uint64_t intersection = 0;
        std::uint64_t union_count = 0;
        std::uint64_t size_a = 0;
        std::uint64_t size_b = 0;
    };
    std::vector<Row> rows;

    void add(const std::string& volume_id, const Mask& pred, const Mask& truth);

    double mean_iou() const;
    double mean_dice() const;
    double pooled_iou() const;
    double pooled_dice() const;
};

/// Writes `<base>.csv` (columns volume_id, iou, dice) and `<base>.json`
/// (rows plus aggregates). A trailing ".csv"/".json" on `base` is stripped.
void write_report(const MetricsReport& report, const std::filesystem::path& base);

MetricsReport read_report_json(const std::filesystem::path& path);

} // namespace awnet
