#include "awnet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "awnet/crf.hpp"
#include "awnet/losses.hpp"

namespace awnet {

Adam::Adam(std::size_t n, double step_size, double beta1, double beta2, double eps)
    : lr_(step_size), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::vector<double>& params, const std::vector<double>& grads,
                std::size_t begin, std::size_t end) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = begin; i < end; ++i) {
        const double g = grads[i];
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
        const double mhat = m_[i] / bc1;
        const double vhat = v_[i] / bc2;
        params[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
}

std::uint64_t volume_content_hash(const Volume& v) {
    // FNV-1a over the dims and the raw payload bytes.
    std::uint64_t h = 1469598103934665603ull;
    const auto mix = [&h](const void* data, std::size_t bytes) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < bytes; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    };
    const std::uint32_t dims[3] = {static_cast<std::uint32_t>(v.dims.d),
                                   static_cast<std::uint32_t>(v.dims.h),
                                   static_cast<std::uint32_t>(v.dims.w)};
    mix(dims, sizeof(dims));
    mix(v.data.data(), v.data.size() * sizeof(float));
    return h;
}

AffinityGraph cached_affinity(const Volume& v, const AffinityParams& p,
                              const std::filesystem::path& cache_dir) {
    std::uint64_t key = volume_content_hash(v);
    const auto fold = [&key](double x) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(x));
        std::memcpy(&bits, &x, sizeof(bits));
        key ^= bits + 0x9e3779b97f4a7c15ull + (key << 6) + (key >> 2);
    };
    fold(p.sigma_i);
    fold(p.sigma_x);
    fold(static_cast<double>(p.radius));
    fold(p.min_weight);

    char name[32];
    std::snprintf(name, sizeof(name), "aff_%016llx.aff",
                  static_cast<unsigned long long>(key));
    const auto path = cache_dir / name;
    if (std::filesystem::exists(path)) {
        AffinityGraph g = load_graph(path);
        if (g.n == v.dims.count())
            return g;
    }
    AffinityGraph g = build_affinity(v, p);
    std::filesystem::create_directories(cache_dir);
    save_graph(g, path);
    return g;
}

std::vector<std::filesystem::path> list_volumes(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> out;
    if (!std::filesystem::is_directory(dir))
        throw invalid_argument_error("not a directory: " + dir.string());
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".vol3")
            out.push_back(entry.path());
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

void check_finite(double x, const char* term, int step, const std::string& volume) {
    if (!std::isfinite(x))
        throw std::runtime_error("train: non-finite " + std::string(term) + " at step " +
                                 std::to_string(step) + " (volume " + volume + ")");
}

} // namespace

TrainResult train(const PipelineConfig& cfg) {
    const auto paths = list_volumes(cfg.train_dir);
    if (paths.empty())
        throw invalid_argument_error("train: no .vol3 volumes in " + cfg.train_dir.string());

    const auto cache_dir = cfg.cache_dir.empty() ? cfg.out_dir / "cache" : cfg.cache_dir;
    std::filesystem::create_directories(cfg.out_dir);

    // Normalize once; graphs are built on the normalized volumes and cached.
    std::vector<Volume> volumes;
    std::vector<Tensor> inputs;
    std::vector<AffinityGraph> graphs;
    volumes.reserve(paths.size());
    for (const auto& p : paths) {
        Volume v = normalize(load_volume(p));
        inputs.push_back(tensor_from_volume(v));
        graphs.push_back(cached_affinity(v, cfg.affinity, cache_dir));
        volumes.push_back(std::move(v));
    }

    WNet net(cfg.network);
    net.init_params();
    auto& ps = net.params();

    const bool alternating = cfg.optimizer.mode == TrainMode::alternating;
    Adam adam_joint(ps.size(), cfg.optimizer.step_size);
    Adam adam_encoder(ps.size(), cfg.optimizer.step_size);

    TrainResult result;
    result.loss_csv_path = cfg.out_dir / "loss.csv";
    result.checkpoint_path = cfg.out_dir / "checkpoint.wnc";

    std::ofstream csv(result.loss_csv_path, std::ios::trunc);
    if (!csv)
        throw io_error(io_error::kind::open_failed, result.loss_csv_path.string());
    csv << "step,J_soft_ncut,J_rec,J_total\n";

    const int n_volumes = static_cast<int>(volumes.size());
    Tensor ncut_grad;
    for (int step = 1; step <= cfg.optimizer.steps; ++step) {
        const int vi = (step - 1) % n_volumes;
        const std::string volume_name = paths[vi].filename().string();

        auto [p, rec] = net.forward(inputs[vi]);
        const double j_ncut = soft_ncut_grad(graphs[vi], p, ncut_grad);

        std::vector<double> ssim_g(rec.size());
        const double ssim_val =
            ssim_grad(std::span<const double>(inputs[vi].v), std::span<const double>(rec.v),
                      cfg.ssim, std::span<double>(ssim_g));
        const double j_rec = 1.0 - ssim_val;
        const double j_total = joint_loss(j_ncut, j_rec, cfg.loss.ncut, cfg.loss.rec);

        check_finite(j_ncut, "J_soft_ncut", step, volume_name);
        check_finite(j_rec, "J_rec", step, volume_name);

        csv << step << "," << format_double(j_ncut) << "," << format_double(j_rec) << ","
            << format_double(j_total) << "\n";

        Tensor grad_p(p.c, p.d, p.h, p.w);
        for (std::size_t i = 0; i < grad_p.size(); ++i)
            grad_p.v[i] = cfg.loss.ncut * ncut_grad.v[i];
        Tensor grad_rec(rec.c, rec.d, rec.h, rec.w);
        for (std::size_t i = 0; i < grad_rec.size(); ++i)
            grad_rec.v[i] = -cfg.loss.rec * ssim_g[i];

        if (!alternating) {
            ps.zero_grad();
            net.backward(grad_p, grad_rec);
            adam_joint.step(ps.data(), ps.grad_data(), 0, ps.size());
        } else {
            // N-Cuts step on the encoder alone, then a reconstruction step
            // through both U-Nets (the original W-Net schedule).
            ps.zero_grad();
            net.backward_encoder(grad_p);
            adam_encoder.step(ps.data(), ps.grad_data(), 0, net.decoder_param_begin());

            auto [p2, rec2] = net.forward(inputs[vi]);
            std::vector<double> ssim_g2(rec2.size());
            ssim_grad(std::span<const double>(inputs[vi].v), std::span<const double>(rec2.v),
                      cfg.ssim, std::span<double>(ssim_g2));
            Tensor grad_rec2(rec2.c, rec2.d, rec2.h, rec2.w);
            for (std::size_t i = 0; i < grad_rec2.size(); ++i)
                grad_rec2.v[i] = -cfg.loss.rec * ssim_g2[i];
            ps.zero_grad();
            net.backward_reconstruction(grad_rec2);
            adam_joint.step(ps.data(), ps.grad_data(), 0, ps.size());
        }

        result.steps_run = step;
        result.final_joint_loss = j_total;
        if (step % n_volumes == 0 || step == cfg.optimizer.steps)
            net.save(result.checkpoint_path);
    }
    if (cfg.optimizer.steps == 0)
        net.save(result.checkpoint_path);
    csv.flush();
    if (!csv)
        throw io_error(io_error::kind::write_failed, result.loss_csv_path.string());
    return result;
}

SegmentResult segment_volume(WNet& net, const Volume& v) {
    SegmentResult out;
    out.normalized = normalize(v);
    out.assignment = net.encode(tensor_from_volume(out.normalized));
    out.labels = map_labels(out.assignment);
    return out;
}

namespace {

std::filesystem::path prob_path(const std::filesystem::path& dir, int k, bool refined) {
    return dir / ((refined ? "refined_prob_" : "prob_") + std::to_string(k) + ".vol3");
}

} // namespace

void write_segmentation(const SegmentResult& seg, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_volume(seg.normalized, dir / "input.vol3");
    for (int k = 0; k < seg.assignment.c; ++k)
        save_volume(volume_from_channel(seg.assignment, k), prob_path(dir, k, false));
    save_labels(seg.labels, dir / "labels.lbl3");
}

SegmentResult read_segmentation(const std::filesystem::path& dir) {
    SegmentResult seg;
    seg.normalized = load_volume(dir / "input.vol3");
    std::vector<Volume> probs;
    for (int k = 0;; ++k) {
        const auto p = prob_path(dir, k, false);
        if (!std::filesystem::exists(p))
            break;
        probs.push_back(load_volume(p));
    }
    if (probs.empty())
        throw invalid_argument_error("read_segmentation: no prob_<k>.vol3 files in " +
                                     dir.string());
    seg.assignment = Tensor(static_cast<int>(probs.size()), seg.normalized.dims.d,
                            seg.normalized.dims.h, seg.normalized.dims.w);
    for (int k = 0; k < seg.assignment.c; ++k) {
        if (!(probs[k].dims == seg.normalized.dims))
            throw invalid_argument_error("read_segmentation: prob volume dims mismatch");
        double* ch = seg.assignment.channel(k);
        for (std::size_t i = 0; i < probs[k].data.size(); ++i)
            ch[i] = probs[k].data[i];
    }
    seg.labels = load_labels(dir / "labels.lbl3");
    return seg;
}

LabelMap refine_segmentation(const std::filesystem::path& dir, const CRFParams& params) {
    SegmentResult seg = read_segmentation(dir);
    Tensor refined = mean_field(seg.assignment, seg.normalized, params);
    for (int k = 0; k < refined.c; ++k)
        save_volume(volume_from_channel(refined, k), prob_path(dir, k, true));
    LabelMap labels = map_labels(refined);
    save_labels(labels, dir / "refined_labels.lbl3");
    return labels;
}

MetricsReport evaluate_segmentation(const LabelMap& pred, const ClusterSelection& sel,
                                    const Mask& truth, const std::string& volume_id) {
    MetricsReport report;
    report.add(volume_id, merge_clusters(pred, sel), truth);
    return report;
}

} // namespace awnet
