#include "skelmatch/dataset.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "skelmatch/tensor_io.hpp"

namespace skelmatch {

Manifest read_manifest(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw io_error("cannot open manifest " + file.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(file.string() + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_array())
        throw parse_error(file.string() + ": expected {\"entries\": [...]}");

    Manifest manifest;
    manifest.base_dir = file.has_parent_path() ? file.parent_path()
                                               : std::filesystem::path(".");
    for (const auto& e : doc["entries"]) {
        ManifestEntry entry;
        if (!e.is_object() || !e.contains("id") || !e.contains("path"))
            throw parse_error(file.string() + ": entry needs 'id' and 'path'");
        entry.id = e["id"].get<std::string>();
        entry.path = e["path"].get<std::string>();
        if (e.contains("label") && !e["label"].is_null()) {
            if (!e["label"].is_number_integer())
                throw parse_error(file.string() + ": label of '" + entry.id +
                                  "' must be an integer");
            entry.label = e["label"].get<int>();
        }
        manifest.entries.push_back(std::move(entry));
    }
    return manifest;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& file) {
    nlohmann::json doc;
    auto entries = nlohmann::json::array();
    for (const auto& e : manifest.entries) {
        nlohmann::json entry;
        entry["id"] = e.id;
        entry["label"] = e.label ? nlohmann::json(*e.label) : nlohmann::json(nullptr);
        entry["path"] = e.path;
        entries.push_back(std::move(entry));
    }
    doc["entries"] = std::move(entries);
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw io_error("cannot write manifest " + file.string());
    out << doc.dump(2) << "\n";
}

Dataset::Dataset(Manifest manifest, PreprocessOptions prep)
    : manifest_(std::move(manifest)), prep_(prep) {
    if (prep_.target_frames < 4 || prep_.target_frames % 4 != 0)
        throw validation_error("dataset: target frame count must be >= 4 and divisible by 4");
}

std::map<int, std::vector<std::size_t>> Dataset::by_label() const {
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < manifest_.entries.size(); ++i)
        if (manifest_.entries[i].label)
            groups[*manifest_.entries[i].label].push_back(i);
    return groups;
}

std::filesystem::path Dataset::resolve(const std::string& relative) const {
    std::filesystem::path p(relative);
    if (p.is_absolute()) return p;
    return manifest_.base_dir / p;
}

FeatureMap preprocess_sequence(const SkeletonSequence& seq,
                               const PreprocessOptions& prep) {
    const SkeletonSequence selected = select_bodies(seq, prep.body_mode);
    const SkeletonSequence resampled = resample_frames(selected, prep.target_frames);
    return raw_features(resampled, prep.center);
}

ScalePyramid load_pyramid_file(const std::filesystem::path& path,
                               const PreprocessOptions& prep) {
    const std::string ext = path.extension().string();

    if (ext == ".stsk") {
        FeatureMap s1 = read_tensor(path);
        std::filesystem::path stem = path;
        stem.replace_extension();
        const auto scale_file = [&stem](const char* tag) {
            std::filesystem::path p = stem;
            p += std::string(".") + tag + ".stsk";
            return p;
        };
        if (std::filesystem::exists(scale_file("s2"))) {
            // fidelity path: independently produced per-scale embeddings
            for (const char* tag : {"s3", "t2", "t3"})
                if (!std::filesystem::exists(scale_file(tag)))
                    throw io_error(path.string() + ": per-scale file " +
                                   scale_file(tag).string() + " is missing");
            return assemble_pyramid(std::move(s1), read_tensor(scale_file("s2")),
                                    read_tensor(scale_file("s3")),
                                    read_tensor(scale_file("t2")),
                                    read_tensor(scale_file("t3")));
        }
        return build_pyramid(s1);
    }

    SkeletonSequence seq;
    if (ext == ".skeleton") {
        std::ifstream in(path);
        if (!in) throw io_error("cannot open " + path.string());
        seq = parse_ntu_skeleton(in, path.stem().string());
    } else if (ext == ".json") {
        std::ifstream in(path);
        if (!in) throw io_error("cannot open " + path.string());
        seq = parse_json_sequence(in, path.stem().string());
    } else {
        throw validation_error(path.string() + ": unsupported input extension '" +
                               ext + "'");
    }
    return build_pyramid(preprocess_sequence(seq, prep));
}

ScalePyramid Dataset::load_pyramid(std::size_t i) const {
    const ManifestEntry& e = manifest_.entries[i];
    try {
        return load_pyramid_file(resolve(e.path), prep_);
    } catch (const Error& err) {
        throw Error(err.kind(), "entry '" + e.id + "': " + err.what());
    }
}

}  // namespace skelmatch
