#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "skelmatch/pooling.hpp"
#include "skelmatch/skeleton.hpp"

namespace skelmatch {

// Raw-sequence preprocessing applied when a dataset entry points at a
// .skeleton or .json file rather than a prebuilt tensor.
struct PreprocessOptions {
    int target_frames = 32;
    bool center = true;
    BodyMode body_mode = BodyMode::kPrimary;
};

struct ManifestEntry {
    std::string id;
    std::optional<int> label;
    std::string path;  // relative to the manifest's directory, or absolute
};

// Index file decoupling dataset layout from evaluation:
//   {"entries": [{"id": ..., "label": ..., "path": ...}, ...]}
struct Manifest {
    std::filesystem::path base_dir;
    std::vector<ManifestEntry> entries;
};

Manifest read_manifest(const std::filesystem::path& file);
void write_manifest(const Manifest& manifest, const std::filesystem::path& file);

// A manifest plus the rules for turning each entry into a ScalePyramid.
// Loading is pure (no caches, no shared state), so entries may be loaded
// from multiple threads concurrently.
class Dataset {
public:
    Dataset(Manifest manifest, PreprocessOptions prep = {});

    std::size_t size() const { return manifest_.entries.size(); }
    const ManifestEntry& entry(std::size_t i) const { return manifest_.entries[i]; }
    const PreprocessOptions& preprocess_options() const { return prep_; }

    // Entry indices grouped by label (entries without a label are skipped),
    // keys and index lists in ascending order.
    std::map<int, std::vector<std::size_t>> by_label() const;

    // .stsk entries are read directly; when per-scale siblings
    // (<stem>.s2.stsk, .s3, .t2, .t3) exist next to the file the pyramid is
    // assembled from them, otherwise it is pooled from the scale-1 map.
    // .skeleton / .json entries run the preprocessing pipeline first.
    ScalePyramid load_pyramid(std::size_t i) const;

    std::filesystem::path resolve(const std::string& relative) const;

private:
    Manifest manifest_;
    PreprocessOptions prep_;
};

// Shared preprocessing path: body selection, resampling, raw coordinate
// features at scale (1,1).
FeatureMap preprocess_sequence(const SkeletonSequence& seq,
                               const PreprocessOptions& prep);

// Load a pyramid from one file, applying the same rules as Dataset entries
// (.stsk with optional per-scale siblings, or a raw .skeleton/.json sequence).
ScalePyramid load_pyramid_file(const std::filesystem::path& path,
                               const PreprocessOptions& prep = {});

}  // namespace skelmatch
