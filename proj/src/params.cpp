#include "awnet/params.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

namespace awnet {

std::size_t ParamStore::add(std::string name, std::vector<int> shape) {
    std::size_t count = 1;
    for (int s : shape) {
        if (s < 1)
            throw invalid_argument_error("ParamStore::add: non-positive shape extent");
        count *= static_cast<std::size_t>(s);
    }
    const std::size_t offset = data_.size();
    data_.resize(offset + count, 0.0);
    grad_.resize(offset + count, 0.0);
    entries_.push_back({std::move(name), std::move(shape), offset, count});
    return offset;
}

void ParamStore::zero_grad() {
    std::fill(grad_.begin(), grad_.end(), 0.0);
}

namespace {

template <typename T>
void put_raw(std::ofstream& out, const T& x) {
    out.write(reinterpret_cast<const char*>(&x), sizeof(T));
}

template <typename T>
void get_raw(std::ifstream& in, T& x) {
    in.read(reinterpret_cast<char*>(&x), sizeof(T));
}

} // namespace

void save_checkpoint(const ParamStore& ps, const NetworkConfig& cfg,
                     const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw io_error(io_error::kind::open_failed, path.string());
    out.write("WNC1", 4);
    put_raw(out, std::uint32_t{1});
    put_raw(out, static_cast<std::uint32_t>(cfg.depth));
    put_raw(out, static_cast<std::uint32_t>(cfg.base_channels));
    put_raw(out, static_cast<std::uint32_t>(cfg.k_classes));
    put_raw(out, static_cast<std::uint32_t>(cfg.kernel_size));
    put_raw(out, cfg.prelu_init);
    put_raw(out, cfg.seed);
    put_raw(out, static_cast<std::uint32_t>(ps.entries().size()));
    for (const auto& e : ps.entries()) {
        put_raw(out, static_cast<std::uint16_t>(e.name.size()));
        out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        put_raw(out, static_cast<std::uint8_t>(e.shape.size()));
        for (int s : e.shape)
            put_raw(out, static_cast<std::uint32_t>(s));
        out.write(reinterpret_cast<const char*>(ps.data().data() + e.offset),
                  static_cast<std::streamsize>(e.size * sizeof(double)));
    }
    if (!out)
        throw io_error(io_error::kind::write_failed, path.string());
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw io_error(io_error::kind::open_failed, path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "WNC1", 4) != 0)
        throw io_error(io_error::kind::bad_magic, path.string());
    std::uint32_t version = 0;
    get_raw(in, version);
    if (!in)
        throw io_error(io_error::kind::bad_header, path.string());
    if (version != 1)
        throw io_error(io_error::kind::bad_version,
                       path.string() + ": checkpoint version " + std::to_string(version));

    CheckpointData ck;
    std::uint32_t depth = 0, base = 0, k = 0, kernel = 0, n_entries = 0;
    get_raw(in, depth);
    get_raw(in, base);
    get_raw(in, k);
    get_raw(in, kernel);
    get_raw(in, ck.config.prelu_init);
    get_raw(in, ck.config.seed);
    get_raw(in, n_entries);
    if (!in)
        throw io_error(io_error::kind::bad_header, path.string());
    ck.config.depth = static_cast<int>(depth);
    ck.config.base_channels = static_cast<int>(base);
    ck.config.k_classes = static_cast<int>(k);
    ck.config.kernel_size = static_cast<int>(kernel);

    for (std::uint32_t i = 0; i < n_entries; ++i) {
        ParamStore::Entry e;
        std::uint16_t name_len = 0;
        get_raw(in, name_len);
        e.name.resize(name_len);
        in.read(e.name.data(), name_len);
        std::uint8_t ndim = 0;
        get_raw(in, ndim);
        e.shape.resize(ndim);
        e.size = 1;
        for (auto& s : e.shape) {
            std::uint32_t v = 0;
            get_raw(in, v);
            s = static_cast<int>(v);
            e.size *= v;
        }
        if (!in)
            throw io_error(io_error::kind::truncated, path.string());
        e.offset = ck.data.size();
        ck.data.resize(e.offset + e.size);
        in.read(reinterpret_cast<char*>(ck.data.data() + e.offset),
                static_cast<std::streamsize>(e.size * sizeof(double)));
        if (!in)
            throw io_error(io_error::kind::truncated, path.string());
        ck.entries.push_back(std::move(e));
    }
    // Anything past the declared entries is corruption.
    char extra;
    if (in.read(&extra, 1))
        throw io_error(io_error::kind::trailing_data, path.string());
    return ck;
}

NetworkConfig validate_config(const NetworkConfig& cfg) {
    if (cfg.depth < 1)
        throw invalid_argument_error("NetworkConfig: depth must be >= 1");
    if (cfg.base_channels < 1)
        throw invalid_argument_error("NetworkConfig: base_channels must be >= 1");
    if (cfg.k_classes < 2)
        throw invalid_argument_error("NetworkConfig: K must be >= 2");
    if (cfg.k_classes > 255)
        throw invalid_argument_error("NetworkConfig: K must fit 8-bit labels");
    if (cfg.kernel_size != 3)
        throw invalid_argument_error("NetworkConfig: kernel_size is fixed at 3");
    return cfg;
}

} // namespace awnet
