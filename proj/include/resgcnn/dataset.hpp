#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "resgcnn/tensor.hpp"

namespace resgcnn {

struct RawRecord {
    std::int64_t frame_id = 0;
    std::int64_t ped_id = 0;
    double x = 0.0;  // meters, world coordinates
    double y = 0.0;
};

/// One training/eval unit: N pedestrians present through 20 consecutive
/// sampled frames, split 8 observed + 12 future.
struct SequenceSample {
    std::vector<std::int64_t> ped_ids;
    Tensor obs;     // [N, t_obs, 2]
    Tensor future;  // [N, t_pred, 2]
    std::int64_t start_frame = 0;
    std::string source_scene;

    int n_pedestrians() const { return obs.dim(0); }
};

struct DatasetSplit {
    std::vector<SequenceSample> train;
    std::vector<SequenceSample> test;
    std::string held_out_scene;
};

struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Parse a 4-column whitespace-separated annotation file:
/// frame_id ped_id x y. frame_id/ped_id are truncated to integers.
/// Malformed lines raise ParseError with the line number.
std::vector<RawRecord> parse_file(const std::string& path);

/// Slide a 20-frame window (stride 1 over sorted distinct frame ids) and emit
/// a sample per window containing exactly the pedestrians present in all 20
/// frames. Windows with no such pedestrian are skipped.
std::vector<SequenceSample> build_sequences(const std::vector<RawRecord>& records,
                                            int t_obs = 8, int t_pred = 12,
                                            const std::string& scene = "");

/// Leave-one-set-out: test = held-out scene, train = all others concatenated
/// in scene-name order.
DatasetSplit loso_split(const std::map<std::string, std::vector<SequenceSample>>& scenes,
                        const std::string& held_out);

/// Manifest: plain-text "scene_name = relative/path" lines.
std::map<std::string, std::string> parse_manifest(const std::string& path);

/// Parse every scene named in the manifest and window it into sequences.
std::map<std::string, std::vector<SequenceSample>> load_scenes(
    const std::string& dataset_dir, const std::string& manifest_path,
    int t_obs = 8, int t_pred = 12);

}  // namespace resgcnn
