#include "skelmatch/episode.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "skelmatch/parallel.hpp"
#include "skelmatch/rng.hpp"

namespace skelmatch {

void SplitDefinition::validate() const {
    std::set<int> train(train_classes.begin(), train_classes.end());
    std::set<int> test(test_classes.begin(), test_classes.end());
    for (int c : test)
        if (train.count(c))
            throw validation_error("split '" + name + "': class " + std::to_string(c) +
                                   " is in both train and test");
    std::set<int> seen;
    for (const auto& [cls, id] : exemplars) {
        if (!test.count(cls))
            throw validation_error("split '" + name + "': exemplar '" + id +
                                   "' maps to class " + std::to_string(cls) +
                                   " outside the test set");
        if (!seen.insert(cls).second)
            throw validation_error("split '" + name + "': duplicate exemplar class " +
                                   std::to_string(cls));
    }
}

namespace {

std::vector<int> range_excluding(int first, int last, const std::vector<int>& excluded) {
    std::set<int> skip(excluded.begin(), excluded.end());
    std::vector<int> out;
    for (int c = first; c <= last; ++c)
        if (!skip.count(c)) out.push_back(c);
    return out;
}

std::string ntu_exemplar(int setup, int cls) {
    std::ostringstream ss;
    ss << "S" << std::setw(3) << std::setfill('0') << setup << "C003P008R001A"
       << std::setw(3) << std::setfill('0') << cls;
    return ss.str();
}

std::vector<SplitDefinition> make_builtin_splits() {
    std::vector<SplitDefinition> splits;

    // NTU RGB+D 120: every 6th class starting at 1 is novel; exemplars are
    // one fixed recording per novel class (setup 1 for A1..A55, setup 18 for
    // A61..A115).
    {
        SplitDefinition s;
        s.name = "ntu120";
        for (int c = 1; c <= 115; c += 6) s.test_classes.push_back(c);
        s.train_classes = range_excluding(1, 120, s.test_classes);
        for (int c : s.test_classes)
            s.exemplars.emplace_back(c, ntu_exemplar(c <= 55 ? 1 : 18, c));
        s.validation_note = "subdivide train classes by cross-subject grouping";
        splits.push_back(std::move(s));
    }

    // NTU RGB+D 60: the ntu120 novel classes and exemplars with label <= 60.
    {
        SplitDefinition s;
        s.name = "ntu60";
        for (int c = 1; c <= 55; c += 6) s.test_classes.push_back(c);
        s.train_classes = range_excluding(1, 60, s.test_classes);
        for (int c : s.test_classes) s.exemplars.emplace_back(c, ntu_exemplar(1, c));
        s.validation_note = "subdivide train classes by cross-subject grouping";
        splits.push_back(std::move(s));
    }

    // PKU-MMD part I: 10 novel classes, exemplars are trimmed segments named
    // <video>_A_<class>.
    {
        SplitDefinition s;
        s.name = "pku";
        s.test_classes = {1, 6, 11, 16, 21, 26, 31, 36, 41, 46};
        s.train_classes = range_excluding(1, 51, s.test_classes);
        const std::vector<std::string> videos = {"0003-L", "0003-L", "0002-L", "0005-L",
                                                 "0005-L", "0005-L", "0002-L", "0003-L",
                                                 "0002-L", "0003-L"};
        for (std::size_t i = 0; i < s.test_classes.size(); ++i)
            s.exemplars.emplace_back(s.test_classes[i],
                                     videos[i] + "_A_" +
                                         std::to_string(s.test_classes[i]));
        s.validation_note = "subdivide train classes by cross-subject grouping";
        splits.push_back(std::move(s));
    }

    for (const auto& s : splits) s.validate();
    return splits;
}

}  // namespace

const std::vector<SplitDefinition>& builtin_splits() {
    static const std::vector<SplitDefinition> splits = make_builtin_splits();
    return splits;
}

std::vector<std::string> builtin_split_names() {
    std::vector<std::string> names;
    for (const auto& s : builtin_splits()) names.push_back(s.name);
    return names;
}

const SplitDefinition& builtin_split(const std::string& name) {
    for (const auto& s : builtin_splits())
        if (s.name == name) return s;
    std::string known;
    for (const auto& n : builtin_split_names()) known += (known.empty() ? "" : ", ") + n;
    throw validation_error("unknown split '" + name + "' (known: " + known + ")");
}

std::string split_to_json(const SplitDefinition& split, int indent) {
    nlohmann::json doc;
    doc["name"] = split.name;
    doc["train_classes"] = split.train_classes;
    doc["test_classes"] = split.test_classes;
    auto exemplars = nlohmann::json::array();
    for (const auto& [cls, id] : split.exemplars)
        exemplars.push_back({{"class", cls}, {"id", id}});
    doc["exemplars"] = std::move(exemplars);
    doc["validation_note"] = split.validation_note;
    return doc.dump(indent);
}

SplitDefinition split_from_json(std::istream& in) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("split: ") + e.what());
    }
    SplitDefinition split;
    if (!doc.is_object()) throw parse_error("split: expected a JSON object");
    split.name = doc.value("name", std::string("custom"));
    for (const char* key : {"train_classes", "test_classes"})
        if (!doc.contains(key) || !doc[key].is_array())
            throw parse_error(std::string("split: missing '") + key + "' array");
    for (const auto& v : doc["train_classes"]) split.train_classes.push_back(v.get<int>());
    for (const auto& v : doc["test_classes"]) split.test_classes.push_back(v.get<int>());
    std::sort(split.train_classes.begin(), split.train_classes.end());
    std::sort(split.test_classes.begin(), split.test_classes.end());
    if (doc.contains("exemplars"))
        for (const auto& e : doc["exemplars"])
            split.exemplars.emplace_back(e.at("class").get<int>(),
                                         e.at("id").get<std::string>());
    std::sort(split.exemplars.begin(), split.exemplars.end());
    split.validation_note = doc.value("validation_note", std::string());
    split.validate();
    return split;
}

Episode sample_episode(const std::map<int, std::vector<std::size_t>>& pool,
                       const EpisodeSpec& spec) {
    if (spec.n_way < 1) throw validation_error("sample_episode: n_way must be >= 1");
    if (spec.k_shot != 1) throw validation_error("sample_episode: only 1-shot is supported");
    if (spec.n_query < 1) throw validation_error("sample_episode: n_query must be >= 1");

    std::vector<int> candidates;
    for (const auto& [cls, indices] : pool) candidates.push_back(cls);
    if (static_cast<int>(candidates.size()) < spec.n_way)
        throw validation_error("sample_episode: " + std::to_string(spec.n_way) +
                               "-way episode but only " +
                               std::to_string(candidates.size()) + " classes available");
    const std::size_t need = static_cast<std::size_t>(spec.k_shot) + spec.n_query;
    for (int cls : candidates)
        if (pool.at(cls).size() < need)
            throw validation_error("insufficient-samples: class " + std::to_string(cls) +
                                   " has " + std::to_string(pool.at(cls).size()) +
                                   " samples, needs " + std::to_string(need));

    Rng rng(spec.seed);
    Episode episode;
    episode.classes = rng.sample(candidates, static_cast<std::size_t>(spec.n_way));
    std::sort(episode.classes.begin(), episode.classes.end());

    for (int cls : episode.classes) {
        const auto picks = rng.sample(pool.at(cls), need);
        episode.support.push_back(picks[0]);
        for (std::size_t k = 1; k < picks.size(); ++k) {
            episode.query_indices.push_back(picks[k]);
            episode.query_labels.push_back(cls);
        }
    }
    return episode;
}

int classify_query(const ScalePyramid& query,
                   const std::vector<std::pair<int, const ScalePyramid*>>& supports,
                   const MatchOptions& options, std::vector<double>* scores) {
    if (supports.empty()) throw validation_error("classify_query: no support classes");
    int best_class = supports.front().first;
    double best_score = -std::numeric_limits<double>::infinity();
    if (scores) scores->clear();
    for (const auto& [cls, pyramid] : supports) {
        double s;
        try {
            s = combined(query, *pyramid, options).total;
        } catch (const Error& e) {
            throw Error(e.kind(), "support class " + std::to_string(cls) + ": " + e.what());
        }
        if (scores) scores->push_back(s);
        if (s > best_score) {  // strict: ties keep the lowest class id
            best_score = s;
            best_class = cls;
        }
    }
    return best_class;
}

namespace {

std::map<int, std::vector<std::size_t>> test_pool(const Dataset& data,
                                                  const SplitDefinition& split) {
    const std::set<int> test(split.test_classes.begin(), split.test_classes.end());
    std::map<int, std::vector<std::size_t>> pool;
    for (const auto& [cls, indices] : data.by_label())
        if (test.count(cls)) pool[cls] = indices;
    if (pool.empty())
        throw validation_error("evaluation: dataset holds no sample of any test class of split '" +
                               split.name + "'");
    return pool;
}

}  // namespace

Protocol1Report evaluate_protocol1(const Dataset& data, const SplitDefinition& split,
                                   const EpisodeSpec& spec, const MatchOptions& options,
                                   int n_episodes, int workers) {
    if (n_episodes < 1) throw validation_error("protocol 1: n_episodes must be >= 1");
    split.validate();
    const auto pool = test_pool(data, split);
    // Fail eagerly on the whole pool so errors do not depend on which
    // episodes get sampled.
    {
        EpisodeSpec probe = spec;
        probe.seed = 0;
        sample_episode(pool, probe);
    }

    Protocol1Report report;
    report.split = split.name;
    report.spec = spec;
    report.strategy = options.strategy;
    report.n_episodes = n_episodes;
    report.episodes.resize(static_cast<std::size_t>(n_episodes));

    parallel_for(static_cast<std::size_t>(n_episodes), workers, [&](std::size_t e) {
        EpisodeSpec sub = spec;
        sub.seed = mix_seed(spec.seed, e);
        const Episode episode = sample_episode(pool, sub);

        std::vector<ScalePyramid> support_pyramids;
        support_pyramids.reserve(episode.support.size());
        for (std::size_t idx : episode.support)
            support_pyramids.push_back(data.load_pyramid(idx));
        std::vector<std::pair<int, const ScalePyramid*>> supports;
        for (std::size_t k = 0; k < episode.classes.size(); ++k)
            supports.emplace_back(episode.classes[k], &support_pyramids[k]);

        EpisodeResult result;
        result.seed = sub.seed;
        result.classes = episode.classes;
        int correct = 0;
        for (std::size_t qi = 0; qi < episode.query_indices.size(); ++qi) {
            const std::size_t idx = episode.query_indices[qi];
            QueryResult qr;
            qr.id = data.entry(idx).id;
            qr.true_class = episode.query_labels[qi];
            const ScalePyramid pyramid = data.load_pyramid(idx);
            qr.predicted_class = classify_query(pyramid, supports, options, &qr.scores);
            if (qr.predicted_class == qr.true_class) ++correct;
            result.queries.push_back(std::move(qr));
        }
        result.accuracy = static_cast<double>(correct) /
                          static_cast<double>(result.queries.size());
        report.episodes[e] = std::move(result);
    });

    double mean = 0.0;
    for (const auto& ep : report.episodes) mean += ep.accuracy;
    mean /= static_cast<double>(n_episodes);
    double var = 0.0;
    for (const auto& ep : report.episodes) {
        const double d = ep.accuracy - mean;
        var += d * d;
    }
    report.accuracy_mean = mean;
    report.ci95_halfwidth =
        n_episodes > 1
            ? 1.96 * std::sqrt(var / static_cast<double>(n_episodes - 1)) /
                  std::sqrt(static_cast<double>(n_episodes))
            : 0.0;
    return report;
}

Protocol2Report evaluate_protocol2(const Dataset& data, const SplitDefinition& split,
                                   const MatchOptions& options, int workers) {
    split.validate();
    if (!split.has_exemplars())
        throw validation_error("protocol 2: split '" + split.name +
                               "' defines no exemplars");

    std::map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < data.size(); ++i) by_id[data.entry(i).id] = i;

    Protocol2Report report;
    report.split = split.name;
    report.strategy = options.strategy;

    std::vector<std::size_t> gallery_indices;
    std::set<std::string> gallery_ids;
    for (const auto& [cls, id] : split.exemplars) {
        const auto it = by_id.find(id);
        if (it == by_id.end())
            throw validation_error("missing-exemplar: '" + id + "' (class " +
                                   std::to_string(cls) + ") not in dataset");
        report.classes.push_back(cls);
        report.exemplar_ids.push_back(id);
        gallery_indices.push_back(it->second);
        gallery_ids.insert(id);
    }

    std::vector<ScalePyramid> gallery_pyramids;
    gallery_pyramids.reserve(gallery_indices.size());
    for (std::size_t idx : gallery_indices)
        gallery_pyramids.push_back(data.load_pyramid(idx));
    std::vector<std::pair<int, const ScalePyramid*>> supports;
    for (std::size_t k = 0; k < report.classes.size(); ++k)
        supports.emplace_back(report.classes[k], &gallery_pyramids[k]);

    const std::set<int> test(split.test_classes.begin(), split.test_classes.end());
    std::vector<std::size_t> queries;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& e = data.entry(i);
        if (!e.label || !test.count(*e.label)) continue;
        if (gallery_ids.count(e.id)) continue;  // leave the rest: exemplars excluded
        queries.push_back(i);
    }
    if (queries.empty())
        throw validation_error("protocol 2: no queries remain after removing exemplars");

    report.predictions.resize(queries.size());
    parallel_for(queries.size(), workers, [&](std::size_t k) {
        const std::size_t idx = queries[k];
        QueryResult qr;
        qr.id = data.entry(idx).id;
        qr.true_class = *data.entry(idx).label;
        const ScalePyramid pyramid = data.load_pyramid(idx);
        qr.predicted_class = classify_query(pyramid, supports, options, &qr.scores);
        report.predictions[k] = std::move(qr);
    });

    const std::size_t n_classes = report.classes.size();
    std::map<int, std::size_t> class_pos;
    for (std::size_t k = 0; k < n_classes; ++k) class_pos[report.classes[k]] = k;
    report.confusion.assign(n_classes, std::vector<int>(n_classes, 0));
    std::vector<int> per_class_total(n_classes, 0);
    std::vector<int> per_class_correct(n_classes, 0);
    int correct = 0;
    for (const auto& qr : report.predictions) {
        const std::size_t t = class_pos.at(qr.true_class);
        const std::size_t p = class_pos.at(qr.predicted_class);
        ++report.confusion[t][p];
        ++per_class_total[t];
        if (t == p) {
            ++per_class_correct[t];
            ++correct;
        }
    }
    report.n_queries = static_cast<int>(report.predictions.size());
    report.accuracy = static_cast<double>(correct) / static_cast<double>(report.n_queries);
    report.per_class_accuracy.resize(n_classes, 0.0);
    for (std::size_t k = 0; k < n_classes; ++k)
        if (per_class_total[k] > 0)
            report.per_class_accuracy[k] = static_cast<double>(per_class_correct[k]) /
                                           static_cast<double>(per_class_total[k]);
    return report;
}

std::vector<SplitDefinition> reduced_training_splits(const SplitDefinition& split,
                                                     const std::vector<int>& class_counts,
                                                     std::uint64_t seed) {
    for (int count : class_counts)
        if (count < 1 || count > static_cast<int>(split.train_classes.size()))
            throw validation_error("count-too-large: " + std::to_string(count) +
                                   " of " + std::to_string(split.train_classes.size()) +
                                   " train classes");

    // One shuffle, nested prefixes: subset(a) is contained in subset(b) for a < b.
    std::vector<int> shuffled = split.train_classes;
    Rng rng(seed);
    rng.shuffle(shuffled);

    std::vector<SplitDefinition> out;
    for (int count : class_counts) {
        SplitDefinition derived = split;
        derived.name = split.name + "-train" + std::to_string(count);
        derived.train_classes.assign(shuffled.begin(), shuffled.begin() + count);
        std::sort(derived.train_classes.begin(), derived.train_classes.end());
        out.push_back(std::move(derived));
    }
    return out;
}

namespace {

nlohmann::json query_to_json(const QueryResult& qr) {
    return {{"id", qr.id},
            {"true_class", qr.true_class},
            {"predicted_class", qr.predicted_class},
            {"scores", qr.scores}};
}

nlohmann::json echo_to_json(const ConfigEcho& echo) {
    nlohmann::json cfg = nlohmann::json::object();
    for (const auto& [key, value] : echo) cfg[key] = value;
    return cfg;
}

}  // namespace

std::string protocol1_report_to_json(const Protocol1Report& report,
                                     const ConfigEcho& config_echo, int indent) {
    nlohmann::json doc;
    doc["protocol"] = 1;
    doc["split"] = report.split;
    doc["strategy"] = strategy_name(report.strategy);
    doc["n_way"] = report.spec.n_way;
    doc["k_shot"] = report.spec.k_shot;
    doc["n_query"] = report.spec.n_query;
    doc["seed"] = report.spec.seed;
    doc["n_episodes"] = report.n_episodes;
    doc["accuracy_mean"] = report.accuracy_mean;
    doc["ci95_halfwidth"] = report.ci95_halfwidth;
    auto episodes = nlohmann::json::array();
    for (const auto& ep : report.episodes) {
        nlohmann::json e;
        e["seed"] = ep.seed;
        e["classes"] = ep.classes;
        e["accuracy"] = ep.accuracy;
        auto queries = nlohmann::json::array();
        for (const auto& qr : ep.queries) queries.push_back(query_to_json(qr));
        e["queries"] = std::move(queries);
        episodes.push_back(std::move(e));
    }
    doc["episodes"] = std::move(episodes);
    doc["config"] = echo_to_json(config_echo);
    return doc.dump(indent);
}

std::string protocol2_report_to_json(const Protocol2Report& report,
                                     const ConfigEcho& config_echo, int indent) {
    nlohmann::json doc;
    doc["protocol"] = 2;
    doc["split"] = report.split;
    doc["strategy"] = strategy_name(report.strategy);
    doc["classes"] = report.classes;
    doc["exemplars"] = report.exemplar_ids;
    doc["n_queries"] = report.n_queries;
    doc["accuracy"] = report.accuracy;
    doc["per_class_accuracy"] = report.per_class_accuracy;
    doc["confusion"] = report.confusion;
    auto predictions = nlohmann::json::array();
    for (const auto& qr : report.predictions) predictions.push_back(query_to_json(qr));
    doc["predictions"] = std::move(predictions);
    doc["config"] = echo_to_json(config_echo);
    return doc.dump(indent);
}

std::string protocol1_report_to_csv(const Protocol1Report& report) {
    std::ostringstream out;
    out << "strategy,protocol,accuracy,ci95,n_episodes\n";
    out << strategy_name(report.strategy) << ",1," << report.accuracy_mean << ","
        << report.ci95_halfwidth << "," << report.n_episodes << "\n";
    return out.str();
}

std::string protocol2_report_to_csv(const Protocol2Report& report) {
    std::ostringstream out;
    out << "strategy,protocol,accuracy,ci95,n_episodes\n";
    out << strategy_name(report.strategy) << ",2," << report.accuracy << ",0,1\n";
    return out.str();
}

}  // namespace skelmatch
