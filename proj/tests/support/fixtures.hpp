#pragma once

// Shared generators for tests: random node sets and maps, NTU text fixtures,
// synthetic clustered datasets on disk, scratch directories.

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "skelmatch/dataset.hpp"
#include "skelmatch/pooling.hpp"
#include "skelmatch/rng.hpp"
#include "skelmatch/tensor_io.hpp"
#include "skelmatch/transport.hpp"

namespace skelmatch::testing {

inline NodeSet random_node_set(int count, int dim, std::uint64_t seed) {
    Rng rng(seed);
    NodeSet set;
    set.dim = dim;
    set.count = count;
    set.data.resize(static_cast<std::size_t>(count) * dim);
    for (double& v : set.data) v = rng.normal();
    return set;
}

inline FeatureMap random_map(int c, int n, int t, std::uint64_t seed) {
    Rng rng(seed);
    FeatureMap map(c, n, t);
    for (double& v : map.data) v = rng.normal();
    return map;
}

// Every node carries the same random vector, so joint/frame pooling at any
// level reproduces it and all matching terms reach their maxima.
inline FeatureMap node_constant_map(int c, int n, int t, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> vec(static_cast<std::size_t>(c));
    double norm = 0.0;
    do {
        norm = 0.0;
        for (double& v : vec) {
            v = rng.normal();
            norm += v * v;
        }
    } while (std::sqrt(norm) < 1e-6);
    FeatureMap map(c, n, t);
    for (int ch = 0; ch < c; ++ch)
        for (int nn = 0; nn < n; ++nn)
            for (int tt = 0; tt < t; ++tt) map.at(ch, nn, tt) = vec[ch];
    return map;
}

class ScratchDir {
public:
    explicit ScratchDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("skelmatch_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

// NTU .skeleton text with one body per frame; joints[t][j] = {x,y,z}.
inline std::string ntu_text(const std::vector<std::vector<std::array<double, 3>>>& frames) {
    std::ostringstream out;
    out << frames.size() << "\n";
    for (const auto& joints : frames) {
        out << 1 << "\n";
        out << "72057594037931101 0 1 1 1 1 0 0.1 -0.2 2\n";
        out << joints.size() << "\n";
        for (const auto& j : joints)
            out << j[0] << " " << j[1] << " " << j[2]
                << " 100 100 200 200 0.1 0.2 0.3 0.4 2\n";
    }
    return out.str();
}

inline std::vector<std::vector<std::array<double, 3>>> constant_joints(
    int frames, int joints, double value) {
    return std::vector<std::vector<std::array<double, 3>>>(
        frames,
        std::vector<std::array<double, 3>>(joints, {value, value, value}));
}

// Unit centroids with pairwise cosine similarity <= max_cos, by rejection.
inline std::vector<std::vector<double>> separated_centroids(int count, int dim,
                                                            double max_cos,
                                                            std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> centroids;
    while (static_cast<int>(centroids.size()) < count) {
        std::vector<double> v(static_cast<std::size_t>(dim));
        double norm = 0.0;
        for (double& x : v) {
            x = rng.normal();
            norm += x * x;
        }
        norm = std::sqrt(norm);
        if (norm < 1e-9) continue;
        for (double& x : v) x /= norm;
        bool ok = true;
        for (const auto& u : centroids) {
            double dot = 0.0;
            for (int k = 0; k < dim; ++k) dot += u[k] * v[k];
            if (dot > max_cos) { ok = false; break; }
        }
        if (ok) centroids.push_back(std::move(v));
    }
    return centroids;
}

struct ClusterDatasetSpec {
    std::vector<int> class_ids;
    int per_class = 8;
    int channels = 6;
    int joints = 25;
    int frames = 32;
    double sigma = 0.05;
    double max_centroid_cos = 0.5;
    std::uint64_t seed = 1234;
    // id_for(class_id, sample_index); defaults to "c<class>_s<sample>"
    std::function<std::string(int, int)> id_for;
};

// Per-class Gaussian feature clusters written as .stsk tensors plus a
// manifest; returns the manifest path.
inline std::filesystem::path write_cluster_dataset(const std::filesystem::path& dir,
                                                   const ClusterDatasetSpec& spec) {
    const auto centroids =
        separated_centroids(static_cast<int>(spec.class_ids.size()), spec.channels,
                            spec.max_centroid_cos, spec.seed);
    Manifest manifest;
    manifest.base_dir = dir;
    Rng rng(mix_seed(spec.seed, 777));
    for (std::size_t k = 0; k < spec.class_ids.size(); ++k) {
        for (int s = 0; s < spec.per_class; ++s) {
            FeatureMap map(spec.channels, spec.joints, spec.frames);
            for (int n = 0; n < spec.joints; ++n)
                for (int t = 0; t < spec.frames; ++t)
                    for (int c = 0; c < spec.channels; ++c)
                        map.at(c, n, t) = centroids[k][static_cast<std::size_t>(c)] +
                                          spec.sigma * rng.normal();
            std::string id = spec.id_for
                                 ? spec.id_for(spec.class_ids[k], s)
                                 : "c" + std::to_string(spec.class_ids[k]) + "_s" +
                                       std::to_string(s);
            const std::string file = id + ".stsk";
            write_tensor(map, dir / file);
            ManifestEntry entry;
            entry.id = std::move(id);
            entry.label = spec.class_ids[k];
            entry.path = file;
            manifest.entries.push_back(std::move(entry));
        }
    }
    const auto manifest_path = dir / "manifest.json";
    write_manifest(manifest, manifest_path);
    return manifest_path;
}

}  // namespace skelmatch::testing
