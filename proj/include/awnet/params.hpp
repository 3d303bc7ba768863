#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "awnet/errors.hpp"

namespace awnet {

/// Network hyperparameters. `depth` counts poolings per U-Net, so each
/// U-Net has 2*depth + 1 conv modules; channel width doubles per level.
struct NetworkConfig {
    int depth = 4;
    int base_channels = 64;
    int k_classes = 15;
    int kernel_size = 3; // fixed
    double prelu_init = 0.25;
    std::uint64_t seed = 0;
};

/// Flat parameter/gradient storage with named, shaped views. Layers
/// register arrays at construction and address them by offset, so the
/// backing vectors may grow while the network is being built.
class ParamStore {
public:
    struct Entry {
        std::string name;
        std::vector<int> shape;
        std::size_t offset;
        std::size_t size;
    };

    std::size_t add(std::string name, std::vector<int> shape);

    double* param(std::size_t offset) { return data_.data() + offset; }
    const double* param(std::size_t offset) const { return data_.data() + offset; }
    double* grad(std::size_t offset) { return grad_.data() + offset; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& grad_data() { return grad_; }

    std::size_t size() const { return data_.size(); }
    const std::vector<Entry>& entries() const { return entries_; }

    void zero_grad();

private:
    std::vector<double> data_;
    std::vector<double> grad_;
    std::vector<Entry> entries_;
};

// Checkpoint container ".wnc": magic "WNC1", u32 version, the NetworkConfig,
// then every named parameter array in registration order. Little-endian,
// f64 payloads; round-trips bit-exactly. See the README for the naming
// scheme of the entries.
void save_checkpoint(const ParamStore& ps, const NetworkConfig& cfg,
                     const std::filesystem::path& path);

struct CheckpointData {
    NetworkConfig config;
    std::vector<ParamStore::Entry> entries;
    std::vector<double> data;
};

CheckpointData load_checkpoint(const std::filesystem::path& path);

/// Checks the NetworkConfig invariants, returning it on success.
NetworkConfig validate_config(const NetworkConfig& cfg);

} // namespace awnet
