#include "resgcnn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace resgcnn {

namespace {

bool parse_double(const std::string& tok, double& out) {
    std::size_t pos = 0;
    try {
        out = std::stod(tok, &pos);
    } catch (const std::exception&) {
        return false;
    }
    return pos == tok.size() && std::isfinite(out);
}

}  // namespace

std::vector<RawRecord> parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open annotation file: " + path);
    std::vector<RawRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::vector<std::string> fields;
        std::string tok;
        while (ss >> tok) fields.push_back(tok);
        if (fields.empty()) continue;
        if (fields.size() != 4) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected 4 fields, got " +
                             std::to_string(fields.size()));
        }
        double f[4];
        for (int i = 0; i < 4; ++i) {
            if (!parse_double(fields[static_cast<std::size_t>(i)], f[i])) {
                throw ParseError(path + ":" + std::to_string(line_no) + ": field " +
                                 std::to_string(i + 1) + " is not numeric: '" +
                                 fields[static_cast<std::size_t>(i)] + "'");
            }
        }
        records.push_back(RawRecord{static_cast<std::int64_t>(f[0]),
                                    static_cast<std::int64_t>(f[1]), f[2], f[3]});
    }
    return records;
}

std::vector<SequenceSample> build_sequences(const std::vector<RawRecord>& records,
                                            int t_obs, int t_pred, const std::string& scene) {
    const int window = t_obs + t_pred;
    std::vector<SequenceSample> samples;
    if (records.empty()) return samples;

    // Sorted distinct frame ids define "consecutive frames"; raw annotations
    // are typically decimated (every 10th video frame = 0.4 s).
    std::vector<std::int64_t> frames;
    frames.reserve(records.size());
    for (const auto& r : records) frames.push_back(r.frame_id);
    std::sort(frames.begin(), frames.end());
    frames.erase(std::unique(frames.begin(), frames.end()), frames.end());
    if (static_cast<int>(frames.size()) < window) return samples;

    std::unordered_map<std::int64_t, int> frame_index;
    for (std::size_t i = 0; i < frames.size(); ++i)
        frame_index[frames[i]] = static_cast<int>(i);

    // Per pedestrian: positions indexed by frame slot.
    struct Track {
        std::unordered_map<int, std::pair<double, double>> pos;
    };
    std::map<std::int64_t, Track> tracks;  // ordered for deterministic ped order
    for (const auto& r : records) {
        tracks[r.ped_id].pos[frame_index[r.frame_id]] = {r.x, r.y};
    }

    const int n_windows = static_cast<int>(frames.size()) - window + 1;
    for (int w = 0; w < n_windows; ++w) {
        std::vector<std::int64_t> present;
        for (const auto& [pid, tr] : tracks) {
            bool full = true;
            for (int k = 0; k < window; ++k) {
                if (!tr.pos.count(w + k)) { full = false; break; }
            }
            if (full) present.push_back(pid);
        }
        if (present.empty()) continue;

        const int n = static_cast<int>(present.size());
        SequenceSample s;
        s.ped_ids = present;
        s.obs = Tensor({n, t_obs, 2});
        s.future = Tensor({n, t_pred, 2});
        s.start_frame = frames[static_cast<std::size_t>(w)];
        s.source_scene = scene;
        for (int i = 0; i < n; ++i) {
            const auto& tr = tracks.at(present[static_cast<std::size_t>(i)]);
            for (int k = 0; k < window; ++k) {
                const auto& [px, py] = tr.pos.at(w + k);
                if (k < t_obs) {
                    s.obs.at3(i, k, 0) = px;
                    s.obs.at3(i, k, 1) = py;
                } else {
                    s.future.at3(i, k - t_obs, 0) = px;
                    s.future.at3(i, k - t_obs, 1) = py;
                }
            }
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

DatasetSplit loso_split(const std::map<std::string, std::vector<SequenceSample>>& scenes,
                        const std::string& held_out) {
    auto it = scenes.find(held_out);
    if (it == scenes.end()) {
        std::string avail;
        for (const auto& [name, _] : scenes) {
            if (!avail.empty()) avail += ", ";
            avail += name;
        }
        throw std::invalid_argument("unknown held-out scene '" + held_out +
                                    "'; available: " + avail);
    }
    DatasetSplit split;
    split.held_out_scene = held_out;
    split.test = it->second;
    for (const auto& [name, samples] : scenes) {
        if (name == held_out) continue;
        split.train.insert(split.train.end(), samples.begin(), samples.end());
    }
    return split;
}

std::map<std::string, std::string> parse_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open manifest: " + path);
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected 'scene = path'");
        }
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty()) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": empty scene name or path");
        }
        out[key] = val;
    }
    return out;
}

std::map<std::string, std::vector<SequenceSample>> load_scenes(
    const std::string& dataset_dir, const std::string& manifest_path, int t_obs, int t_pred) {
    const auto manifest = parse_manifest(manifest_path);
    std::map<std::string, std::vector<SequenceSample>> scenes;
    for (const auto& [scene, rel] : manifest) {
        const auto path = std::filesystem::path(dataset_dir) / rel;
        scenes[scene] = build_sequences(parse_file(path.string()), t_obs, t_pred, scene);
    }
    return scenes;
}

}  // namespace resgcnn
