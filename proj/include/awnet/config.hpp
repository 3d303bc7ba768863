#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "awnet/affinity.hpp"
#include "awnet/crf.hpp"
#include "awnet/errors.hpp"
#include "awnet/losses.hpp"
#include "awnet/params.hpp"
#include "awnet/volume.hpp"

namespace awnet {

/// Plain-text key-value file: one `key = value` per line, `#` comments.
/// Consumers take() the keys they know; anything left over is a typo and
/// an error.
class KeyValueFile {
public:
    static KeyValueFile parse(const std::filesystem::path& path);
    static KeyValueFile parse_text(const std::string& text, const std::string& origin);

    /// Removes and returns the value; errors on a duplicate scalar key.
    std::optional<std::string> take(const std::string& key);
    /// Removes and returns all values of a repeatable key, in file order.
    std::vector<std::string> take_all(const std::string& key);

    /// Errors if any keys remain unconsumed.
    void expect_empty() const;

    const std::string& origin() const { return origin_; }

private:
    std::vector<std::pair<std::string, std::string>> pairs_;
    std::string origin_;
};

// Typed value parsing with key context in the error message.
int parse_int(const std::string& key, const std::string& value);
double parse_double(const std::string& key, const std::string& value);
std::uint64_t parse_u64(const std::string& key, const std::string& value);
std::vector<double> parse_doubles(const std::string& key, const std::string& value,
                                  std::size_t expected_count);
std::vector<int> parse_int_list(const std::string& key, const std::string& value);

/// Phantom description file; see the README for the key set.
PhantomSpec load_phantom_spec(const std::filesystem::path& path);

/// Training step style: one joint gradient step per volume, or the original
/// W-Net style alternation (an N-Cuts step on the encoder, then a
/// reconstruction step through both U-Nets).
enum class TrainMode { joint, alternating };

struct OptimizerSettings {
    double step_size = 1e-3;
    int steps = 300;
    TrainMode mode = TrainMode::joint;
};

struct LossWeights {
    double ncut = 1.0;
    double rec = 1.0;
};

/// Everything a pipeline run needs; parsed from one key-value file.
struct PipelineConfig {
    NetworkConfig network;
    AffinityParams affinity;
    CRFParams crf;
    SsimConstants ssim;
    LossWeights loss;
    OptimizerSettings optimizer;
    std::uint64_t seed = 0;
    std::filesystem::path train_dir;
    std::filesystem::path out_dir;
    std::filesystem::path cache_dir; // empty -> out_dir / "cache"
    std::vector<int> cluster_selection;

    static PipelineConfig load(const std::filesystem::path& path);
};

} // namespace awnet
