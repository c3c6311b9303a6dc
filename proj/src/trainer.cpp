#include "resgcnn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "resgcnn/config.hpp"

namespace resgcnn {

void TrainConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("train.batch_size must be >= 1");
    if (epochs < 1) throw std::invalid_argument("train.epochs must be >= 1");
    if (lr_initial <= 0.0 || lr_late <= 0.0)
        throw std::invalid_argument("train learning rates must be > 0");
    if (clip_grad_norm < 0.0)
        throw std::invalid_argument("train.clip_grad_norm must be >= 0");
    if (lr_switch_epoch < 0 || lr_switch_epoch >= epochs)
        throw std::invalid_argument("train.lr_switch_epoch must lie inside [0, epochs)");
}

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

NodePtr gaussian_nll(const NodePtr& raw, const Tensor& target) {
    const Tensor& r = raw->value;
    if (r.rank() != 3 || r.dim(0) != 5) {
        throw ShapeError("gaussian_nll expects raw [5, T, N], got " + shape_str(r.shape));
    }
    const int t = r.dim(1), n = r.dim(2);
    if (target.rank() != 3 || target.dim(0) != n || target.dim(1) != t || target.dim(2) != 2) {
        throw ShapeError("gaussian_nll target must be [" + std::to_string(n) + ", " +
                         std::to_string(t) + ", 2], got " + shape_str(target.shape));
    }

    const double count = static_cast<double>(t) * n;
    double total = 0.0;
    for (int k = 0; k < t; ++k) {
        for (int i = 0; i < n; ++i) {
            const double sx = r.at3(2, k, i), sy = r.at3(3, k, i);
            const double sigx = std::exp(sx), sigy = std::exp(sy);
            const double rho = std::tanh(r.at3(4, k, i));
            const double q = 1.0 - rho * rho;
            const double dx = target.at3(i, k, 0) - r.at3(0, k, i);
            const double dy = target.at3(i, k, 1) - r.at3(1, k, i);
            const double z = dx * dx / (sigx * sigx) + dy * dy / (sigy * sigy) -
                             2.0 * rho * dx * dy / (sigx * sigy);
            const double pt = kLog2Pi + sx + sy + 0.5 * std::log(q) + z / (2.0 * q);
            if (!std::isfinite(pt)) {
                throw std::runtime_error("non-finite gaussian_nll at pedestrian " +
                                         std::to_string(i) + ", frame " + std::to_string(k));
            }
            total += pt;
        }
    }

    auto out = std::make_shared<Node>();
    out->value = Tensor({1}, {total / count});
    out->inputs = {raw, constant(target)};
    out->requires_grad = raw->requires_grad;
    if (out->requires_grad) {
        out->ensure_grad();
        out->backward_fn = [t, n, count](Node& self) {
            Node& nraw = *self.inputs[0];
            const Tensor& tgt = self.inputs[1]->value;
            if (!nraw.requires_grad) return;
            nraw.ensure_grad();
            const double g = self.grad.values[0] / count;
            const Tensor& r = nraw.value;
            for (int k = 0; k < t; ++k) {
                for (int i = 0; i < n; ++i) {
                    const double sigx = std::exp(r.at3(2, k, i));
                    const double sigy = std::exp(r.at3(3, k, i));
                    const double rho = std::tanh(r.at3(4, k, i));
                    const double q = 1.0 - rho * rho;
                    const double dx = tgt.at3(i, k, 0) - r.at3(0, k, i);
                    const double dy = tgt.at3(i, k, 1) - r.at3(1, k, i);
                    const double cross = dx * dy / (sigx * sigy);
                    const double z = dx * dx / (sigx * sigx) + dy * dy / (sigy * sigy) -
                                     2.0 * rho * cross;
                    nraw.grad.at3(0, k, i) += g * (-(dx / (sigx * sigx) - rho * dy / (sigx * sigy)) / q);
                    nraw.grad.at3(1, k, i) += g * (-(dy / (sigy * sigy) - rho * dx / (sigx * sigy)) / q);
                    nraw.grad.at3(2, k, i) += g * (1.0 - (dx * dx / (sigx * sigx) - rho * cross) / q);
                    nraw.grad.at3(3, k, i) += g * (1.0 - (dy * dy / (sigy * sigy) - rho * cross) / q);
                    // d/d(arctanh rho) = (1 - rho^2) * d/drho
                    nraw.grad.at3(4, k, i) += g * (-rho - cross + z * rho / q);
                }
            }
        };
    }
    return out;
}

double lr_at_epoch(int epoch, const TrainConfig& cfg) {
    if (epoch < 0 || epoch >= cfg.epochs) {
        throw std::out_of_range("epoch " + std::to_string(epoch) + " outside [0, " +
                                std::to_string(cfg.epochs) + ")");
    }
    return epoch < cfg.lr_switch_epoch ? cfg.lr_initial : cfg.lr_late;
}

Checkpoint Checkpoint::from_model(const ResGcnnModel& model, const KernelConfig& kcfg,
                                  std::uint32_t epoch, const std::string& rng_state) {
    Checkpoint c;
    c.model_config = model.config();
    c.kernel_config = kcfg;
    c.epoch = epoch;
    c.rng_state = rng_state;
    for (const auto& p : model.parameters()) {
        ParamRecord rec;
        rec.name = p.name;
        rec.shape = p.tensor().shape;
        rec.values.reserve(p.tensor().size());
        for (double v : p.tensor().values) rec.values.push_back(static_cast<float>(v));
        c.parameters.push_back(std::move(rec));
    }
    return c;
}

ResGcnnModel Checkpoint::to_model() const {
    ResGcnnModel model(model_config, 0);
    auto& params = model.parameters();
    // Dimension mismatches are runtime failures, not format errors.
    if (params.size() != parameters.size()) {
        throw std::runtime_error("checkpoint holds " + std::to_string(parameters.size()) +
                                 " parameters but the config implies " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& rec = parameters[i];
        if (params[i].name != rec.name || params[i].tensor().shape != rec.shape) {
            throw std::runtime_error("checkpoint parameter '" + rec.name + "' " + shape_str(rec.shape) +
                                     " does not match model parameter '" + params[i].name + "' " +
                                     shape_str(params[i].tensor().shape));
        }
        for (std::size_t j = 0; j < rec.values.size(); ++j) {
            params[i].tensor().values[j] = static_cast<double>(rec.values[j]);
        }
    }
    return model;
}

namespace {

constexpr char kMagic[4] = {'R', 'G', 'C', 'N'};

void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f32(std::string& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
}

void put_bytes(std::string& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw CheckpointTruncatedError("checkpoint truncated");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i)
            v = (v << 8) | static_cast<std::uint8_t>(buf[pos + static_cast<std::size_t>(i)]);
        pos += 4;
        return v;
    }
    float f32() {
        const std::uint32_t bits = u32();
        float f;
        std::memcpy(&f, &bits, 4);
        return f;
    }
    std::string bytes() {
        const std::uint32_t n = u32();
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

void atomic_write(const std::string& path, const std::string& data) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write: " + tmp);
        out.write(data.data(), static_cast<std::streamsize>(data.size()));
        if (!out) throw std::runtime_error("write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, ckpt.format_version);
    put_u32(out, ckpt.epoch);
    put_bytes(out, ckpt.rng_state);
    put_bytes(out, model_config_text(ckpt.model_config));
    put_bytes(out, kernel_config_text(ckpt.kernel_config));
    put_u32(out, static_cast<std::uint32_t>(ckpt.parameters.size()));
    for (const auto& rec : ckpt.parameters) {
        put_bytes(out, rec.name);
        put_u32(out, static_cast<std::uint32_t>(rec.shape.size()));
        for (int d : rec.shape) put_u32(out, static_cast<std::uint32_t>(d));
        for (float v : rec.values) put_f32(out, v);
    }
    atomic_write(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string buf = ss.str();

    Reader r{buf};
    r.need(4);
    if (std::memcmp(buf.data(), kMagic, 4) != 0) {
        throw CheckpointMagicError("bad checkpoint magic in " + path);
    }
    r.pos = 4;
    Checkpoint c;
    c.format_version = r.u32();
    if (c.format_version != Checkpoint::kCurrentVersion) {
        throw CheckpointVersionError("unsupported checkpoint version " +
                                     std::to_string(c.format_version) + " (expected " +
                                     std::to_string(Checkpoint::kCurrentVersion) + ")");
    }
    c.epoch = r.u32();
    c.rng_state = r.bytes();
    c.model_config = parse_model_config_text(r.bytes());
    c.kernel_config = parse_kernel_config_text(r.bytes());
    const std::uint32_t n_params = r.u32();
    for (std::uint32_t p = 0; p < n_params; ++p) {
        Checkpoint::ParamRecord rec;
        rec.name = r.bytes();
        const std::uint32_t rank = r.u32();
        std::size_t numel = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            rec.shape.push_back(static_cast<int>(r.u32()));
            numel *= static_cast<std::size_t>(rec.shape.back());
        }
        rec.values.reserve(numel);
        for (std::size_t i = 0; i < numel; ++i) rec.values.push_back(r.f32());
        c.parameters.push_back(std::move(rec));
    }
    return c;
}

TrainResult train(const DatasetSplit& split, const ModelConfig& model_cfg,
                  const KernelConfig& kernel_cfg, const TrainConfig& train_cfg,
                  std::ostream* loss_log) {
    model_cfg.validate();
    kernel_cfg.validate();
    train_cfg.validate();
    if (split.train.empty()) throw std::invalid_argument("train set is empty");

    // Adjacency depends only on observations; build once.
    std::vector<Tensor> adjacencies;
    adjacencies.reserve(split.train.size());
    for (const auto& seq : split.train) {
        adjacencies.push_back(normalize_adjacency(
            build_adjacency(seq.obs, kernel_cfg, model_cfg.t_pred), kernel_cfg.single_self_loop));
    }

    ResGcnnModel model(model_cfg, train_cfg.seed);
    std::mt19937_64 rng(train_cfg.seed);

    std::vector<std::size_t> order(split.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainResult result;
    for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
        const double lr = lr_at_epoch(epoch, train_cfg);
        std::shuffle(order.begin(), order.end(), rng);

        double epoch_loss = 0.0;
        int accumulated = 0;
        auto step = [&]() {
            if (accumulated == 0) return;
            // Keep the step scale batch-size-invariant.
            const double inv = 1.0 / accumulated;
            for (auto& p : model.parameters())
                for (auto& g : p.grad().values) g *= inv;
            if (train_cfg.clip_grad_norm > 0.0) {
                double sq = 0.0;
                for (auto& p : model.parameters())
                    for (double g : p.grad().values) sq += g * g;
                const double norm = std::sqrt(sq);
                if (norm > train_cfg.clip_grad_norm) {
                    const double scale = train_cfg.clip_grad_norm / norm;
                    for (auto& p : model.parameters())
                        for (auto& g : p.grad().values) g *= scale;
                }
            }
            sgd_step(model.parameters(), lr);
            accumulated = 0;
        };

        for (std::size_t pos = 0; pos < order.size(); ++pos) {
            const std::size_t idx = order[pos];
            const auto& seq = split.train[idx];
            auto out = model.forward_node(model.vertices_from_obs(seq.obs), adjacencies[idx]);
            NodePtr loss;
            try {
                loss = gaussian_nll(out, model.targets_from_future(seq.obs, seq.future));
            } catch (const std::runtime_error& e) {
                throw std::runtime_error(std::string(e.what()) + " (scene '" + seq.source_scene +
                                         "', start_frame " + std::to_string(seq.start_frame) + ")");
            }
            backward(loss);
            epoch_loss += loss->value.values[0];
            if (++accumulated == train_cfg.batch_size) step();
        }
        step();

        const double mean_loss = epoch_loss / static_cast<double>(split.train.size());
        result.epoch_losses.push_back(mean_loss);
        if (loss_log) (*loss_log) << epoch << "\t" << mean_loss << "\n";
    }

    std::ostringstream rng_state;
    rng_state << rng;
    result.checkpoint = Checkpoint::from_model(model, kernel_cfg,
                                               static_cast<std::uint32_t>(train_cfg.epochs),
                                               rng_state.str());
    return result;
}

}  // namespace resgcnn
