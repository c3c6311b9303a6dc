#include "resgcnn/config.hpp"

#include <fstream>
#include <sstream>

namespace resgcnn {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &pos);
    } catch (const std::exception&) {
        pos = std::string::npos;
    }
    if (pos != value.size()) throw ConfigError("config key '" + key + "': not a number: '" + value + "'");
    return v;
}

int to_int(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    long v = 0;
    try {
        v = std::stol(value, &pos);
    } catch (const std::exception&) {
        pos = std::string::npos;
    }
    if (pos != value.size()) throw ConfigError("config key '" + key + "': not an integer: '" + value + "'");
    return static_cast<int>(v);
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "on") return true;
    if (value == "false" || value == "0" || value == "off") return false;
    throw ConfigError("config key '" + key + "': not a boolean: '" + value + "'");
}

}  // namespace

std::map<std::string, std::string> parse_kv_text(const std::string& text,
                                                 const std::string& origin) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
        }
        out[key] = value;
    }
    return out;
}

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_kv_text(ss.str(), path);
}

void apply_model_key(ModelConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "n_fecnn") cfg.n_fecnn = to_int(key, value);
    else if (key == "n_tpcnn") cfg.n_tpcnn = to_int(key, value);
    else if (key == "feature_channels") cfg.feature_channels = to_int(key, value);
    else if (key == "temporal_kernel") cfg.temporal_kernel = to_int(key, value);
    else if (key == "t_obs") cfg.t_obs = to_int(key, value);
    else if (key == "t_pred") cfg.t_pred = to_int(key, value);
    else if (key == "prelu_init_slope") cfg.prelu_init_slope = to_double(key, value);
    else if (key == "relative_mode") cfg.relative_mode = to_bool(key, value);
    else throw ConfigError("unknown model config key: '" + key + "'");
}

void apply_kernel_key(KernelConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "spd_thres") cfg.spd_thres = to_double(key, value);
    else if (key == "omega_spd") cfg.omega_spd = to_double(key, value);
    else if (key == "omega_dir") cfg.omega_dir = to_double(key, value);
    else if (key == "dis_floor") cfg.dis_floor = to_double(key, value);
    else if (key == "eps_dist") cfg.eps_dist = to_double(key, value);
    else if (key == "front_cone_half_angle") cfg.front_cone_half_angle = to_double(key, value);
    else if (key == "single_self_loop") cfg.single_self_loop = to_bool(key, value);
    else throw ConfigError("unknown kernel config key: '" + key + "'");
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

std::string model_config_text(const ModelConfig& cfg) {
    std::ostringstream os;
    os << "n_fecnn=" << cfg.n_fecnn << "\n"
       << "n_tpcnn=" << cfg.n_tpcnn << "\n"
       << "feature_channels=" << cfg.feature_channels << "\n"
       << "temporal_kernel=" << cfg.temporal_kernel << "\n"
       << "t_obs=" << cfg.t_obs << "\n"
       << "t_pred=" << cfg.t_pred << "\n"
       << "prelu_init_slope=" << fmt(cfg.prelu_init_slope) << "\n"
       << "relative_mode=" << (cfg.relative_mode ? "true" : "false") << "\n";
    return os.str();
}

std::string kernel_config_text(const KernelConfig& cfg) {
    std::ostringstream os;
    os << "spd_thres=" << fmt(cfg.spd_thres) << "\n"
       << "omega_spd=" << fmt(cfg.omega_spd) << "\n"
       << "omega_dir=" << fmt(cfg.omega_dir) << "\n"
       << "dis_floor=" << fmt(cfg.dis_floor) << "\n"
       << "eps_dist=" << fmt(cfg.eps_dist) << "\n"
       << "front_cone_half_angle=" << fmt(cfg.front_cone_half_angle) << "\n"
       << "single_self_loop=" << (cfg.single_self_loop ? "true" : "false") << "\n";
    return os.str();
}

ModelConfig parse_model_config_text(const std::string& text) {
    ModelConfig cfg;
    for (const auto& [k, v] : parse_kv_text(text, "<model-config>")) apply_model_key(cfg, k, v);
    return cfg;
}

KernelConfig parse_kernel_config_text(const std::string& text) {
    KernelConfig cfg;
    for (const auto& [k, v] : parse_kv_text(text, "<kernel-config>")) apply_kernel_key(cfg, k, v);
    return cfg;
}

}  // namespace resgcnn
