// skelmatch: convert skeleton recordings to tensors, score sequence pairs,
// and run the one-shot evaluation protocols.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "skelmatch/dataset.hpp"
#include "skelmatch/episode.hpp"
#include "skelmatch/matching.hpp"
#include "skelmatch/skeleton.hpp"
#include "skelmatch/tensor_io.hpp"

namespace fs = std::filesystem;
using namespace skelmatch;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitIo = 2;
constexpr int kExitValidation = 3;
constexpr int kExitSolver = 4;

int exit_code_for(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::kIo:
        case ErrorKind::kParse:
            return kExitIo;
        case ErrorKind::kValidation:
            return kExitValidation;
        case ErrorKind::kSolver:
            return kExitSolver;
    }
    return kExitValidation;
}

struct CommonOptions {
    std::string strategy = "MC";
    std::string solver = "auto";
    double epsilon = 0.05;
    double tolerance = 1e-6;
    int max_iterations = 1000;
    int exact_limit = 4096;
    bool inner_normalization = false;
    int frames = 32;
    bool center = true;
    std::string bodies = "primary";

    void add_flags(CLI::App* cmd) {
        cmd->add_option("--strategy", strategy, "Matching strategy")
            ->check(CLI::IsMember({"S", "Ms", "Mt", "M", "Cs", "Ct", "MC"}))
            ->capture_default_str();
        cmd->add_option("--solver", solver, "Transport solver")
            ->check(CLI::IsMember({"exact", "sinkhorn", "auto"}))
            ->capture_default_str();
        cmd->add_option("--epsilon", epsilon, "Sinkhorn regularization (> 0)")
            ->capture_default_str();
        cmd->add_option("--tol", tolerance, "Sinkhorn marginal tolerance")
            ->capture_default_str();
        cmd->add_option("--max-iter", max_iterations, "Sinkhorn iteration cap")
            ->capture_default_str();
        cmd->add_option("--exact-limit", exact_limit,
                        "Auto solver uses exact while P*Q <= limit")
            ->capture_default_str();
        cmd->add_flag("--inner-normalization", inner_normalization,
                      "Divide each component sum by its term count");
        cmd->add_option("--frames", frames, "Resample raw sequences to T frames")
            ->capture_default_str();
        cmd->add_flag("--center,!--no-center", center,
                      "Subtract the spine-base joint per frame")
            ->capture_default_str();
        cmd->add_option("--bodies", bodies, "Body selection for raw sequences")
            ->check(CLI::IsMember({"primary", "both"}))
            ->capture_default_str();
    }

    void validate() const {
        if (!(epsilon > 0.0))
            throw validation_error("config-invalid: epsilon must be > 0");
        if (frames < 4 || frames % 4 != 0)
            throw validation_error("config-invalid: frames must be >= 4 and divisible by 4");
        if (max_iterations < 1)
            throw validation_error("config-invalid: max-iter must be >= 1");
        if (exact_limit < 1)
            throw validation_error("config-invalid: exact-limit must be >= 1");
    }

    MatchOptions match_options() const {
        MatchOptions options;
        options.strategy = strategy_from_name(strategy);
        options.inner_normalization = inner_normalization;
        options.solver.epsilon = epsilon;
        options.solver.tolerance = tolerance;
        options.solver.max_iterations = max_iterations;
        options.solver.exact_limit = exact_limit;
        options.solver.choice = solver == "exact"      ? SolverChoice::kExact
                                : solver == "sinkhorn" ? SolverChoice::kSinkhorn
                                                       : SolverChoice::kAuto;
        return options;
    }

    PreprocessOptions preprocess_options() const {
        PreprocessOptions prep;
        prep.target_frames = frames;
        prep.center = center;
        prep.body_mode = bodies == "both" ? BodyMode::kBoth : BodyMode::kPrimary;
        return prep;
    }
};

int effective_workers(int requested) {
    int workers = requested > 0 ? requested
                                : static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    if (const char* cap_env = std::getenv("SKELMATCH_THREADS")) {
        const int cap = std::atoi(cap_env);
        if (cap >= 1) workers = std::min(workers, cap);
    }
    return workers;
}

std::string format_double(double v) {
    std::ostringstream ss;
    ss << v;
    return ss.str();
}

// ---------------------------------------------------------------------------
// convert
// ---------------------------------------------------------------------------
int cmd_convert(const std::vector<std::string>& inputs, const std::string& out_dir,
                const CommonOptions& common, const std::string& dtype_name) {
    common.validate();
    const fs::path out(out_dir);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (!fs::is_directory(out)) {
        std::cerr << "error: cannot create output directory " << out << "\n";
        return kExitIo;
    }
    const TensorDType dtype =
        dtype_name == "f32" ? TensorDType::kF32 : TensorDType::kF64;
    const PreprocessOptions prep = common.preprocess_options();

    // Expand directories into their .skeleton/.json files, sorted for
    // deterministic manifests.
    std::vector<fs::path> files;
    for (const auto& input : inputs) {
        const fs::path p(input);
        if (fs::is_directory(p)) {
            for (const auto& e : fs::directory_iterator(p)) {
                const std::string ext = e.path().extension().string();
                if (ext == ".skeleton" || ext == ".json") files.push_back(e.path());
            }
        } else {
            files.push_back(p);
        }
    }
    std::sort(files.begin(), files.end());

    Manifest manifest;
    manifest.base_dir = out;
    int failures = 0;
    for (const auto& file : files) {
        const std::string id = file.stem().string();
        try {
            std::ifstream in(file);
            if (!in) throw io_error("cannot open " + file.string());
            SkeletonSequence seq;
            if (file.extension() == ".skeleton")
                seq = parse_ntu_skeleton(in, id);
            else
                seq = parse_json_sequence(in, id);
            const FeatureMap map = preprocess_sequence(seq, prep);
            const std::string tensor_name = id + ".stsk";
            write_tensor(map, out / tensor_name, dtype);
            ManifestEntry entry;
            entry.id = id;
            entry.label = seq.label;
            entry.path = tensor_name;
            manifest.entries.push_back(std::move(entry));
        } catch (const Error& e) {
            std::cerr << "error: " << file.string() << ": " << e.what() << "\n";
            ++failures;
        }
    }

    write_manifest(manifest, out / "manifest.json");
    std::cout << "converted " << manifest.entries.size() << " of " << files.size()
              << " sequences into " << out.string() << "\n";
    return failures > 0 ? kExitPartial : kExitOk;
}

// ---------------------------------------------------------------------------
// match
// ---------------------------------------------------------------------------
int cmd_match(const std::string& a, const std::string& b, const CommonOptions& common,
              bool pretty) {
    common.validate();
    const PreprocessOptions prep = common.preprocess_options();
    const ScalePyramid xa = load_pyramid_file(a, prep);
    const ScalePyramid xb = load_pyramid_file(b, prep);
    const MatchScore score = combined(xa, xb, common.match_options());
    std::cout << match_score_to_json(score, pretty ? 2 : -1) << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------
SplitDefinition resolve_split(const std::string& name) {
    if (name.size() > 5 && name.substr(name.size() - 5) == ".json") {
        std::ifstream in(name);
        if (!in) throw io_error("cannot open split file " + name);
        return split_from_json(in);
    }
    return builtin_split(name);
}

int cmd_eval(const std::string& data_path, int protocol, const std::string& split_name,
             int episodes, int n_way, int n_query, std::uint64_t seed,
             const std::string& out_dir, int workers, const CommonOptions& common) {
    common.validate();
    if (protocol != 1 && protocol != 2)
        throw validation_error("config-invalid: protocol must be 1 or 2");
    if (data_path.empty()) throw validation_error("config-invalid: data is required");

    const SplitDefinition split = resolve_split(split_name);
    if (protocol == 2 && !split.has_exemplars())
        throw validation_error("config-invalid: split '" + split.name +
                               "' has no exemplars, required by protocol 2");
    if (protocol == 1) {
        if (episodes < 1) throw validation_error("config-invalid: episodes must be >= 1");
        if (n_way < 1) throw validation_error("config-invalid: n-way must be >= 1");
        if (n_query < 1) throw validation_error("config-invalid: n-query must be >= 1");
    }

    const Dataset dataset(read_manifest(data_path), common.preprocess_options());
    const MatchOptions options = common.match_options();
    const int pool_workers = effective_workers(workers);

    const fs::path out(out_dir);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (!fs::is_directory(out)) {
        std::cerr << "error: cannot create output directory " << out << "\n";
        return kExitIo;
    }

    ConfigEcho echo = {
        {"data", data_path},
        {"protocol", std::to_string(protocol)},
        {"split", split_name},
        {"strategy", common.strategy},
        {"solver", common.solver},
        {"epsilon", format_double(common.epsilon)},
        {"tol", format_double(common.tolerance)},
        {"max_iter", std::to_string(common.max_iterations)},
        {"exact_limit", std::to_string(common.exact_limit)},
        {"inner_normalization", common.inner_normalization ? "true" : "false"},
        {"frames", std::to_string(common.frames)},
        {"center", common.center ? "true" : "false"},
        {"bodies", common.bodies},
        {"seed", std::to_string(seed)},
        {"episodes", std::to_string(episodes)},
        {"n_way", std::to_string(n_way)},
        {"n_query", std::to_string(n_query)},
        {"workers", std::to_string(workers)},
        {"out", out_dir},
    };

    std::string report_json;
    std::string report_csv;
    std::ostringstream summary;
    if (protocol == 1) {
        EpisodeSpec spec;
        spec.n_way = n_way;
        spec.n_query = n_query;
        spec.seed = seed;
        const Protocol1Report report =
            evaluate_protocol1(dataset, split, spec, options, episodes, pool_workers);
        report_json = protocol1_report_to_json(report, echo);
        report_csv = protocol1_report_to_csv(report);
        summary << "protocol 1 split " << split.name << " strategy " << common.strategy
                << ": accuracy " << report.accuracy_mean << " +/- "
                << report.ci95_halfwidth << " over " << report.n_episodes
                << " episodes";
    } else {
        const Protocol2Report report =
            evaluate_protocol2(dataset, split, options, pool_workers);
        report_json = protocol2_report_to_json(report, echo);
        report_csv = protocol2_report_to_csv(report);
        summary << "protocol 2 split " << split.name << " strategy " << common.strategy
                << ": accuracy " << report.accuracy << " over " << report.n_queries
                << " queries (" << report.classes.size() << "-way gallery)";
    }

    const fs::path json_path = out / "report.json";
    const fs::path csv_path = out / "report.csv";
    {
        std::ofstream json_out(json_path, std::ios::trunc);
        if (!json_out) throw io_error("cannot write " + json_path.string());
        json_out << report_json << "\n";
        std::ofstream csv_out(csv_path, std::ios::trunc);
        if (!csv_out) throw io_error("cannot write " + csv_path.string());
        csv_out << report_csv;
    }
    std::cout << summary.str() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// splits
// ---------------------------------------------------------------------------
int cmd_splits(const std::string& name, const std::string& reduce,
               std::uint64_t seed) {
    SplitDefinition split;
    try {
        split = resolve_split(name);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;  // unknown name: the message lists the known splits
    }
    if (reduce.empty()) {
        std::cout << split_to_json(split, 2) << "\n";
        return kExitOk;
    }
    std::vector<int> counts;
    std::stringstream ss(reduce);
    std::string token;
    while (std::getline(ss, token, ','))
        if (!token.empty()) counts.push_back(std::stoi(token));
    const auto derived = reduced_training_splits(split, counts, seed);
    std::cout << "[\n";
    for (std::size_t i = 0; i < derived.size(); ++i)
        std::cout << split_to_json(derived[i], 2)
                  << (i + 1 < derived.size() ? ",\n" : "\n");
    std::cout << "]\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Skeleton sequence matching and one-shot evaluation"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from a key=value config file");
    app.allow_config_extras(CLI::config_extras_mode::ignore_all);

    // convert
    auto* convert = app.add_subcommand(
        "convert", "Parse raw sequences, preprocess, write .stsk tensors + manifest");
    std::vector<std::string> convert_inputs;
    std::string convert_out = ".";
    std::string convert_dtype = "f64";
    CommonOptions convert_common;
    convert->add_option("inputs", convert_inputs, "Files or directories")->required();
    convert->add_option("--out", convert_out, "Output directory")->capture_default_str();
    convert->add_option("--dtype", convert_dtype, "Tensor payload type")
        ->check(CLI::IsMember({"f32", "f64"}))
        ->capture_default_str();
    convert_common.add_flags(convert);

    // match
    auto* match = app.add_subcommand("match", "Score one sequence pair, JSON to stdout");
    std::string match_a, match_b;
    bool match_pretty = false;
    CommonOptions match_common;
    match->add_option("a", match_a, "First input (.stsk/.skeleton/.json)")->required();
    match->add_option("b", match_b, "Second input")->required();
    match->add_flag("--pretty", match_pretty, "Indent the JSON output");
    match_common.add_flags(match);

    // eval
    auto* eval = app.add_subcommand("eval", "Run an evaluation protocol, write reports");
    std::string eval_data;
    int eval_protocol = 1;
    std::string eval_split = "ntu120";
    int eval_episodes = 1000;
    int eval_n_way = 5;
    int eval_n_query = 15;
    std::uint64_t eval_seed = 0;
    std::string eval_out = ".";
    int eval_workers = 0;
    CommonOptions eval_common;
    eval->add_option("--data", eval_data, "Dataset manifest (from `convert`)");
    eval->add_option("--protocol", eval_protocol, "1 = episodes, 2 = exemplar gallery")
        ->capture_default_str();
    eval->add_option("--split", eval_split, "Built-in split name or a split .json file")
        ->capture_default_str();
    eval->add_option("--episodes", eval_episodes, "Protocol-1 episode count")
        ->capture_default_str();
    eval->add_option("--n-way", eval_n_way, "Classes per episode")->capture_default_str();
    eval->add_option("--n-query", eval_n_query, "Queries per class per episode")
        ->capture_default_str();
    eval->add_option("--seed", eval_seed, "Master sampling seed")->capture_default_str();
    eval->add_option("--out", eval_out, "Report output directory")->capture_default_str();
    eval->add_option("--workers", eval_workers,
                     "Worker threads (0 = hardware; SKELMATCH_THREADS caps)")
        ->capture_default_str();
    eval_common.add_flags(eval);

    // splits
    auto* splits = app.add_subcommand("splits", "Print a split definition as JSON");
    std::string splits_name;
    std::string splits_reduce;
    std::uint64_t splits_seed = 0;
    splits->add_option("name", splits_name, "Built-in split name or a split .json file")
        ->required();
    splits->add_option("--reduce", splits_reduce,
                       "Comma-separated train-class counts for nested subsets");
    splits->add_option("--seed", splits_seed, "Subset selection seed")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (convert->parsed())
            return cmd_convert(convert_inputs, convert_out, convert_common, convert_dtype);
        if (match->parsed())
            return cmd_match(match_a, match_b, match_common, match_pretty);
        if (eval->parsed())
            return cmd_eval(eval_data, eval_protocol, eval_split, eval_episodes,
                            eval_n_way, eval_n_query, eval_seed, eval_out, eval_workers,
                            eval_common);
        if (splits->parsed())
            return cmd_splits(splits_name, splits_reduce, splits_seed);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitValidation;
}
