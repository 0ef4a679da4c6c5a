#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "skelmatch/dataset.hpp"
#include "skelmatch/matching.hpp"

namespace skelmatch {

// Disjoint train/test class split, optionally with the fixed one-exemplar
// gallery used by the exemplar protocol.
struct SplitDefinition {
    std::string name;
    std::vector<int> train_classes;  // ascending
    std::vector<int> test_classes;   // ascending
    std::vector<std::pair<int, std::string>> exemplars;  // (class, sample id), by class
    std::string validation_note;  // how train would subdivide for validation

    void validate() const;
    bool has_exemplars() const { return !exemplars.empty(); }
};

// Built-in splits: "ntu120" (100/20 classes, 20 exemplars), "ntu60"
// (50/10, 10 exemplars), "pku" (41/10, 10 exemplars).
const std::vector<SplitDefinition>& builtin_splits();
const SplitDefinition& builtin_split(const std::string& name);
std::vector<std::string> builtin_split_names();

std::string split_to_json(const SplitDefinition& split, int indent = -1);
SplitDefinition split_from_json(std::istream& in);

struct EpisodeSpec {
    int n_way = 5;
    int k_shot = 1;  // the harness is one-shot; kept explicit for clarity
    int n_query = 15;
    std::uint64_t seed = 0;
};

// One sampled n-way one-shot task over dataset entry indices.
struct Episode {
    std::vector<int> classes;                 // ascending, size n_way
    std::vector<std::size_t> support;         // aligned with classes
    std::vector<std::size_t> query_indices;   // class-major order
    std::vector<int> query_labels;            // aligned with query_indices
};

// Draw n_way distinct classes and per class 1 support + n_query disjoint
// queries from `pool` (label -> entry indices). Fully determined by
// spec.seed; every candidate class must hold at least k_shot + n_query
// samples or the offending (lowest) class id is reported.
Episode sample_episode(const std::map<int, std::vector<std::size_t>>& pool,
                       const EpisodeSpec& spec);

struct QueryResult {
    std::string id;
    int true_class = 0;
    int predicted_class = 0;
    std::vector<double> scores;  // aligned with the episode/gallery class list
};

struct EpisodeResult {
    std::uint64_t seed = 0;  // substream seed; replays this episode alone
    std::vector<int> classes;
    std::vector<QueryResult> queries;
    double accuracy = 0.0;
};

// Highest combined score wins; ties break to the lowest class id. `supports`
// must be ordered by ascending class id.
int classify_query(const ScalePyramid& query,
                   const std::vector<std::pair<int, const ScalePyramid*>>& supports,
                   const MatchOptions& options, std::vector<double>* scores = nullptr);

struct Protocol1Report {
    std::string split;
    EpisodeSpec spec;
    Strategy strategy = Strategy::kMC;
    int n_episodes = 0;
    double accuracy_mean = 0.0;
    double ci95_halfwidth = 0.0;  // normal approximation over episode accuracies
    std::vector<EpisodeResult> episodes;
};

// Repeated random n-way one-shot episodes over the split's test classes.
// Episode e derives its substream seed from (spec.seed, e), so results are
// independent of worker count and scheduling.
Protocol1Report evaluate_protocol1(const Dataset& data, const SplitDefinition& split,
                                   const EpisodeSpec& spec, const MatchOptions& options,
                                   int n_episodes, int workers = 1);

struct Protocol2Report {
    std::string split;
    Strategy strategy = Strategy::kMC;
    std::vector<int> classes;  // gallery classes, ascending
    std::vector<std::string> exemplar_ids;  // aligned with classes
    int n_queries = 0;
    double accuracy = 0.0;
    std::vector<double> per_class_accuracy;     // aligned with classes
    std::vector<std::vector<int>> confusion;    // [true][predicted]
    std::vector<QueryResult> predictions;
};

// Fixed-gallery protocol: every test-class sample except the exemplars is
// classified against the one-exemplar-per-class gallery.
Protocol2Report evaluate_protocol2(const Dataset& data, const SplitDefinition& split,
                                   const MatchOptions& options, int workers = 1);

// Nested train-class subsets (each larger set contains the smaller) for
// external reduced-training-set studies, deterministic given the seed.
std::vector<SplitDefinition> reduced_training_splits(const SplitDefinition& split,
                                                     const std::vector<int>& class_counts,
                                                     std::uint64_t seed);

// Report serialization. `config_echo` key/value pairs are embedded verbatim
// under "config" for provenance; reports contain no timestamps, so identical
// inputs serialize byte-identically.
using ConfigEcho = std::vector<std::pair<std::string, std::string>>;
std::string protocol1_report_to_json(const Protocol1Report& report,
                                     const ConfigEcho& config_echo, int indent = 2);
std::string protocol2_report_to_json(const Protocol2Report& report,
                                     const ConfigEcho& config_echo, int indent = 2);
std::string protocol1_report_to_csv(const Protocol1Report& report);
std::string protocol2_report_to_csv(const Protocol2Report& report);

}  // namespace skelmatch
