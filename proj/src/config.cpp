#include "awnet/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace awnet {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace

KeyValueFile KeyValueFile::parse(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw config_error("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str(), path.string());
}

KeyValueFile KeyValueFile::parse_text(const std::string& text, const std::string& origin) {
    KeyValueFile f;
    f.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error(origin + ":" + std::to_string(lineno) +
                               ": expected `key = value`, got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw config_error(origin + ":" + std::to_string(lineno) + ": empty key");
        f.pairs_.emplace_back(key, value);
    }
    return f;
}

std::optional<std::string> KeyValueFile::take(const std::string& key) {
    std::optional<std::string> found;
    for (auto it = pairs_.begin(); it != pairs_.end();) {
        if (it->first == key) {
            if (found)
                throw config_error(origin_ + ": duplicate key '" + key + "'");
            found = it->second;
            it = pairs_.erase(it);
        } else {
            ++it;
        }
    }
    return found;
}

std::vector<std::string> KeyValueFile::take_all(const std::string& key) {
    std::vector<std::string> out;
    for (auto it = pairs_.begin(); it != pairs_.end();) {
        if (it->first == key) {
            out.push_back(it->second);
            it = pairs_.erase(it);
        } else {
            ++it;
        }
    }
    return out;
}

void KeyValueFile::expect_empty() const {
    if (pairs_.empty())
        return;
    std::string keys;
    for (const auto& [k, v] : pairs_) {
        if (!keys.empty()) keys += ", ";
        keys += "'" + k + "'";
    }
    throw config_error(origin_ + ": unknown key(s) " + keys);
}

int parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(value, &pos);
        if (pos != value.size())
            throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw config_error("key '" + key + "': expected integer, got '" + value + "'");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(value, &pos);
        if (pos != value.size())
            throw std::invalid_argument("trailing");
        return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
        throw config_error("key '" + key + "': expected unsigned integer, got '" + value + "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size())
            throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw config_error("key '" + key + "': expected number, got '" + value + "'");
    }
}

std::vector<double> parse_doubles(const std::string& key, const std::string& value,
                                  std::size_t expected_count) {
    std::istringstream in(value);
    std::vector<double> out;
    std::string tok;
    while (in >> tok)
        out.push_back(parse_double(key, tok));
    if (expected_count != 0 && out.size() != expected_count)
        throw config_error("key '" + key + "': expected " + std::to_string(expected_count) +
                           " numbers, got " + std::to_string(out.size()));
    return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    std::string tok;
    std::istringstream in(value);
    while (std::getline(in, tok, ',')) {
        tok = trim(tok);
        if (tok.empty())
            throw config_error("key '" + key + "': empty list element");
        out.push_back(parse_int(key, tok));
    }
    return out;
}

PhantomSpec load_phantom_spec(const std::filesystem::path& path) {
    KeyValueFile f = KeyValueFile::parse(path);
    PhantomSpec spec;
    if (auto v = f.take("dims")) {
        const auto d = parse_doubles("dims", *v, 3);
        spec.dims = Dims{static_cast<int>(d[0]), static_cast<int>(d[1]), static_cast<int>(d[2])};
    } else {
        throw config_error(path.string() + ": missing required key 'dims'");
    }
    if (auto v = f.take("background_intensity"))
        spec.background_intensity = parse_double("background_intensity", *v);
    if (auto v = f.take("noise_sigma"))
        spec.noise_sigma = parse_double("noise_sigma", *v);
    if (auto v = f.take("seed"))
        spec.seed = parse_u64("seed", *v);
    // ellipsoid = cz cy cx rz ry rx intensity label
    for (const auto& line : f.take_all("ellipsoid")) {
        const auto vals = parse_doubles("ellipsoid", line, 8);
        PhantomSpec::Ellipsoid e;
        e.cz = vals[0];
        e.cy = vals[1];
        e.cx = vals[2];
        e.rz = vals[3];
        e.ry = vals[4];
        e.rx = vals[5];
        e.intensity = vals[6];
        e.label = static_cast<int>(vals[7]);
        spec.ellipsoids.push_back(e);
    }
    f.expect_empty();
    return spec;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
    KeyValueFile f = KeyValueFile::parse(path);
    PipelineConfig c;

    if (auto v = f.take("seed")) c.seed = parse_u64("seed", *v);
    c.network.seed = c.seed;

    if (auto v = f.take("network.depth")) c.network.depth = parse_int("network.depth", *v);
    if (auto v = f.take("network.base_channels"))
        c.network.base_channels = parse_int("network.base_channels", *v);
    if (auto v = f.take("network.classes"))
        c.network.k_classes = parse_int("network.classes", *v);
    if (auto v = f.take("network.prelu_init"))
        c.network.prelu_init = parse_double("network.prelu_init", *v);

    if (auto v = f.take("affinity.sigma_i")) c.affinity.sigma_i = parse_double("affinity.sigma_i", *v);
    if (auto v = f.take("affinity.sigma_x")) c.affinity.sigma_x = parse_double("affinity.sigma_x", *v);
    if (auto v = f.take("affinity.radius")) c.affinity.radius = parse_int("affinity.radius", *v);
    if (auto v = f.take("affinity.min_weight"))
        c.affinity.min_weight = parse_double("affinity.min_weight", *v);

    if (auto v = f.take("ssim.c1")) c.ssim.c1 = parse_double("ssim.c1", *v);
    if (auto v = f.take("ssim.c2")) c.ssim.c2 = parse_double("ssim.c2", *v);

    if (auto v = f.take("loss.ncut_weight")) c.loss.ncut = parse_double("loss.ncut_weight", *v);
    if (auto v = f.take("loss.rec_weight")) c.loss.rec = parse_double("loss.rec_weight", *v);

    if (auto v = f.take("train.steps")) c.optimizer.steps = parse_int("train.steps", *v);
    if (auto v = f.take("train.step_size"))
        c.optimizer.step_size = parse_double("train.step_size", *v);
    if (auto v = f.take("train.mode")) {
        if (*v == "joint")
            c.optimizer.mode = TrainMode::joint;
        else if (*v == "alternating")
            c.optimizer.mode = TrainMode::alternating;
        else
            throw config_error("key 'train.mode': expected joint|alternating, got '" + *v + "'");
    }
    if (auto v = f.take("train.volumes_dir")) c.train_dir = *v;
    if (auto v = f.take("train.out_dir")) c.out_dir = *v;
    if (auto v = f.take("train.cache_dir")) c.cache_dir = *v;

    if (auto v = f.take("crf.iterations")) c.crf.iterations = parse_int("crf.iterations", *v);
    if (auto v = f.take("crf.w_smooth")) c.crf.w_smooth = parse_double("crf.w_smooth", *v);
    if (auto v = f.take("crf.theta_gamma")) c.crf.theta_gamma = parse_double("crf.theta_gamma", *v);
    if (auto v = f.take("crf.w_appear")) c.crf.w_appear = parse_double("crf.w_appear", *v);
    if (auto v = f.take("crf.theta_alpha")) c.crf.theta_alpha = parse_double("crf.theta_alpha", *v);
    if (auto v = f.take("crf.theta_beta")) c.crf.theta_beta = parse_double("crf.theta_beta", *v);
    if (auto v = f.take("crf.truncation_radius"))
        c.crf.truncation_radius = parse_int("crf.truncation_radius", *v);
    if (auto v = f.take("crf.epsilon")) c.crf.epsilon = parse_double("crf.epsilon", *v);

    if (auto v = f.take("eval.clusters")) c.cluster_selection = parse_int_list("eval.clusters", *v);

    f.expect_empty();

    validate_config(c.network);
    if (c.affinity.sigma_i <= 0 || c.affinity.sigma_x <= 0)
        throw config_error("affinity bandwidths must be > 0");
    if (c.affinity.radius < 1)
        throw config_error("affinity.radius must be >= 1");
    if (c.optimizer.steps < 0)
        throw config_error("train.steps must be >= 0");
    if (c.optimizer.step_size <= 0)
        throw config_error("train.step_size must be > 0");
    if (c.ssim.c1 <= 0 || c.ssim.c2 <= 0)
        throw config_error("ssim stabilizers must be > 0");
    return c;
}

} // namespace awnet
