#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "resgcnn/dataset.hpp"

namespace resgcnn::testing {

/// Crowd-like synthetic annotations: pedestrians enter at staggered frames
/// and walk with slowly drifting velocity. Frame ids are decimated by 10,
/// mirroring the 0.4 s sampling of the real annotation files.
inline std::vector<RawRecord> synthetic_scene(std::uint64_t seed, int n_peds, int n_frames) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> pos0(-8.0, 8.0);
    std::uniform_real_distribution<double> speed(0.2, 1.6);
    std::uniform_real_distribution<double> angle(0.0, 6.283185307179586);
    std::normal_distribution<double> jitter(0.0, 0.03);
    std::uniform_int_distribution<int> entry(0, std::max(0, n_frames / 3));
    std::uniform_int_distribution<int> duration(20, n_frames);

    std::vector<RawRecord> records;
    for (int p = 0; p < n_peds; ++p) {
        const int first = entry(rng);
        const int last = std::min(n_frames - 1, first + duration(rng));
        double x = pos0(rng), y = pos0(rng);
        const double a = angle(rng), s = speed(rng);
        double vx = s * std::cos(a) * 0.4, vy = s * std::sin(a) * 0.4;
        for (int f = first; f <= last; ++f) {
            records.push_back(RawRecord{static_cast<std::int64_t>(f) * 10,
                                        static_cast<std::int64_t>(p + 1), x, y});
            vx += jitter(rng) * 0.4;
            vy += jitter(rng) * 0.4;
            x += vx;
            y += vy;
        }
    }
    // Annotation files are frame-major in practice; order records by frame.
    std::stable_sort(records.begin(), records.end(),
                     [](const RawRecord& a, const RawRecord& b) { return a.frame_id < b.frame_id; });
    return records;
}

inline void write_scene_file(const std::string& path, const std::vector<RawRecord>& records) {
    std::ofstream out(path);
    out.precision(17);
    for (const auto& r : records)
        out << r.frame_id << "\t" << r.ped_id << "\t" << r.x << "\t" << r.y << "\n";
}

/// Write a multi-scene synthetic dataset (annotation files plus manifest)
/// under dir. Returns the manifest path.
inline std::string write_synthetic_dataset(const std::string& dir,
                                           const std::vector<std::string>& scene_names,
                                           std::uint64_t seed, int n_peds = 12,
                                           int n_frames = 120) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::ostringstream manifest;
    for (std::size_t i = 0; i < scene_names.size(); ++i) {
        const std::string file = scene_names[i] + ".txt";
        write_scene_file((fs::path(dir) / file).string(),
                         synthetic_scene(seed + i * 101, n_peds, n_frames));
        manifest << scene_names[i] << " = " << file << "\n";
    }
    const std::string mpath = (fs::path(dir) / "manifest.txt").string();
    std::ofstream out(mpath);
    out << manifest.str();
    return mpath;
}

}  // namespace resgcnn::testing
