#include "awnet/evalseg.hpp"

#include <fstream>

#include <json.hpp>

namespace awnet {

Mask merge_clusters(const LabelMap& labels, const ClusterSelection& sel) {
    if (sel.ids.empty())
        throw invalid_argument_error("merge_clusters: empty cluster selection");
    for (int id : sel.ids)
        if (id < 0 || id > 255)
            throw invalid_argument_error("merge_clusters: cluster id outside 0..255");
    Mask m(labels.dims);
    for (std::size_t i = 0; i < labels.labels.size(); ++i)
        m.values[i] = sel.ids.count(labels.labels[i]) ? 1 : 0;
    return m;
}

Mask foreground_mask(const LabelMap& labels) {
    Mask m(labels.dims);
    for (std::size_t i = 0; i < labels.labels.size(); ++i)
        m.values[i] = labels.labels[i] != 0 ? 1 : 0;
    return m;
}

namespace {

struct Overlap {
    std::uint64_t inter = 0, uni = 0, a = 0, b = 0;
};

Overlap overlap(const Mask& a, const Mask& b) {
    if (!(a.dims == b.dims))
        throw invalid_argument_error("mask overlap: dims mismatch");
    Overlap o;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const bool ia = a.values[i] != 0, ib = b.values[i] != 0;
        o.inter += ia && ib;
        o.uni += ia || ib;
        o.a += ia;
        o.b += ib;
    }
    return o;
}

} // namespace

double iou(const Mask& a, const Mask& b) {
    const Overlap o = overlap(a, b);
    if (o.uni == 0)
        return 1.0; // both empty: perfect agreement by convention
    return static_cast<double>(o.inter) / static_cast<double>(o.uni);
}

double dice(const Mask& a, const Mask& b) {
    const Overlap o = overlap(a, b);
    if (o.a + o.b == 0)
        return 1.0;
    return 2.0 * static_cast<double>(o.inter) / static_cast<double>(o.a + o.b);
}

void MetricsReport::add(const std::string& volume_id, const Mask& pred, const Mask& truth) {
    const Overlap o = overlap(pred, truth);
    Row r;
    r.volume_id = volume_id;
    r.iou = o.uni == 0 ? 1.0 : static_cast<double>(o.inter) / static_cast<double>(o.uni);
    r.dice = (o.a + o.b) == 0 ? 1.0
                              : 2.0 * static_cast<double>(o.inter) / static_cast<double>(o.a + o.b);
    r.intersection = o.inter;
    r.union_count = o.uni;
    r.size_a = o.a;
    r.size_b = o.b;
    rows.push_back(std::move(r));
}

double MetricsReport::mean_iou() const {
    if (rows.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : rows) s += r.iou;
    return s / static_cast<double>(rows.size());
}

double MetricsReport::mean_dice() const {
    if (rows.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : rows) s += r.dice;
    return s / static_cast<double>(rows.size());
}

double MetricsReport::pooled_iou() const {
    std::uint64_t inter = 0, uni = 0;
    for (const auto& r : rows) {
        inter += r.intersection;
        uni += r.union_count;
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double MetricsReport::pooled_dice() const {
    std::uint64_t inter = 0, sizes = 0;
    for (const auto& r : rows) {
        inter += r.intersection;
        sizes += r.size_a + r.size_b;
    }
    if (sizes == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(sizes);
}

namespace {

std::filesystem::path report_base(std::filesystem::path base) {
    const auto ext = base.extension();
    if (ext == ".csv" || ext == ".json")
        base.replace_extension();
    return base;
}

} // namespace

void write_report(const MetricsReport& report, const std::filesystem::path& base_in) {
    const auto base = report_base(base_in);

    std::ofstream csv(base.string() + ".csv");
    if (!csv)
        throw io_error(io_error::kind::open_failed, base.string() + ".csv");
    csv << "volume_id,iou,dice\n";
    csv.precision(17);
    for (const auto& r : report.rows)
        csv << r.volume_id << "," << r.iou << "," << r.dice << "\n";
    if (!csv)
        throw io_error(io_error::kind::write_failed, base.string() + ".csv");

    nlohmann::json j;
    j["volumes"] = nlohmann::json::array();
    for (const auto& r : report.rows) {
        j["volumes"].push_back({{"volume_id", r.volume_id},
                                {"iou", r.iou},
                                {"dice", r.dice},
                                {"intersection", r.intersection},
                                {"union", r.union_count},
                                {"pred_size", r.size_a},
                                {"truth_size", r.size_b}});
    }
    j["aggregates"] = {{"mean_iou", report.mean_iou()},
                       {"mean_dice", report.mean_dice()},
                       {"pooled_iou", report.pooled_iou()},
                       {"pooled_dice", report.pooled_dice()}};
    std::ofstream js(base.string() + ".json");
    if (!js)
        throw io_error(io_error::kind::open_failed, base.string() + ".json");
    js << j.dump(2) << "\n";
    if (!js)
        throw io_error(io_error::kind::write_failed, base.string() + ".json");
}

MetricsReport read_report_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw io_error(io_error::kind::open_failed, path.string());
    nlohmann::json j;
    in >> j;
    MetricsReport report;
    for (const auto& row : j.at("volumes")) {
        MetricsReport::Row r;
        r.volume_id = row.at("volume_id").get<std::string>();
        r.iou = row.at("iou").get<double>();
        r.dice = row.at("dice").get<double>();
        r.intersection = row.at("intersection").get<std::uint64_t>();
        r.union_count = row.at("union").get<std::uint64_t>();
        r.size_a = row.at("pred_size").get<std::uint64_t>();
        r.size_b = row.at("truth_size").get<std::uint64_t>();
        report.rows.push_back(std::move(r));
    }
    return report;
}

} // namespace awnet
