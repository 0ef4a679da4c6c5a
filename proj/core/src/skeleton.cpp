#include "skelmatch/skeleton.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <istream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace skelmatch {

namespace {

// Line-oriented reader that tracks the 1-based line number for error messages.
class LineReader {
public:
    explicit LineReader(std::istream& in, const std::string& origin)
        : in_(in), origin_(origin) {}

    // Next non-empty line; throws on EOF.
    std::string next(const char* what) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (line.find_first_not_of(" \t\r\n") != std::string::npos) return line;
        }
        throw parse_error(origin_ + ":" + std::to_string(line_no_) +
                          ": truncated file, expected " + std::string(what));
    }

    int line_no() const { return line_no_; }
    const std::string& origin() const { return origin_; }

    [[noreturn]] void fail(const std::string& msg) const {
        throw parse_error(origin_ + ":" + std::to_string(line_no_) + ": " + msg);
    }

private:
    std::istream& in_;
    std::string origin_;
    int line_no_ = 0;
};

int parse_count(LineReader& reader, const std::string& line, const char* what) {
    std::istringstream ss(line);
    long long v = 0;
    if (!(ss >> v) || v < 0)
        reader.fail(std::string("malformed header, expected ") + what + ": '" + line + "'");
    std::string rest;
    if (ss >> rest && !rest.empty() && rest[0] != '#')
        reader.fail(std::string("malformed header, trailing token after ") + what);
    if (v > 1'000'000) reader.fail(std::string(what) + " out of range");
    return static_cast<int>(v);
}

struct RawFrame {
    int body_count = 0;
    std::vector<std::vector<double>> joints;  // per body: N_j * 3 coords
};

}  // namespace

SkeletonSequence parse_ntu_skeleton(std::istream& in, const std::string& source_id) {
    LineReader reader(in, source_id);

    const int frame_count = parse_count(reader, reader.next("frame count"), "frame count");
    if (frame_count == 0)
        reader.fail("empty-after-cleaning: file declares zero frames");

    std::vector<RawFrame> frames;
    int joints_per_body = 0;
    int max_bodies = 0;

    for (int f = 0; f < frame_count; ++f) {
        RawFrame frame;
        frame.body_count = parse_count(reader, reader.next("body count"), "body count");
        for (int b = 0; b < frame.body_count; ++b) {
            reader.next("body header");  // tracking metadata, ignored
            const int joint_count =
                parse_count(reader, reader.next("joint count"), "joint count");
            if (joint_count == 0) reader.fail("body with zero joints");
            if (joints_per_body == 0) {
                joints_per_body = joint_count;
            } else if (joint_count != joints_per_body) {
                reader.fail("joint count " + std::to_string(joint_count) +
                            " differs from earlier " + std::to_string(joints_per_body));
            }
            std::vector<double> coords;
            coords.reserve(static_cast<std::size_t>(joint_count) * 3);
            for (int j = 0; j < joint_count; ++j) {
                const std::string line = reader.next("joint line");
                std::istringstream ss(line);
                for (int k = 0; k < 3; ++k) {
                    double v;
                    if (!(ss >> v))
                        reader.fail("non-numeric field in joint line: '" + line + "'");
                    if (!std::isfinite(v))
                        reader.fail("non-finite coordinate in joint line");
                    coords.push_back(v);
                }
                // Depth/colour/orientation columns are skipped by position.
            }
            frame.joints.push_back(std::move(coords));
        }
        if (frame.body_count > 0) {
            max_bodies = std::max(max_bodies, frame.body_count);
            frames.push_back(std::move(frame));
        }
        // Zero-body frames are dropped here, before resampling.
    }

    if (frames.empty())
        throw parse_error(source_id + ": empty-after-cleaning, no frame has a body");

    SkeletonSequence seq;
    seq.frames = static_cast<int>(frames.size());
    seq.bodies = max_bodies;
    seq.joints_per_body = joints_per_body;
    seq.source_id = source_id;
    seq.label = label_from_source_id(source_id);
    seq.coords.assign(static_cast<std::size_t>(seq.frames) * max_bodies *
                          joints_per_body * 3,
                      0.0);
    seq.body_present.assign(static_cast<std::size_t>(seq.frames) * max_bodies, 0);

    for (int t = 0; t < seq.frames; ++t) {
        const RawFrame& frame = frames[t];
        for (int m = 0; m < frame.body_count; ++m) {
            seq.body_present[static_cast<std::size_t>(t) * max_bodies + m] = 1;
            const std::vector<double>& joints = frame.joints[m];
            for (int j = 0; j < joints_per_body; ++j)
                for (int k = 0; k < 3; ++k)
                    seq.coord(t, m, j, k) = joints[static_cast<std::size_t>(j) * 3 + k];
        }
    }
    return seq;
}

SkeletonSequence parse_json_sequence(std::istream& in, const std::string& source_id) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(source_id + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("frames") || !doc["frames"].is_array())
        throw parse_error(source_id + ": expected object with a 'frames' array");

    const auto& frames = doc["frames"];
    if (frames.empty()) throw parse_error(source_id + ": empty-after-cleaning, no frames");

    int bodies = -1;
    int joints = -1;
    for (const auto& frame : frames) {
        if (!frame.is_array() || frame.empty())
            throw parse_error(source_id + ": each frame must be a non-empty body array");
        if (bodies < 0) bodies = static_cast<int>(frame.size());
        if (static_cast<int>(frame.size()) != bodies)
            throw parse_error(source_id + ": inconsistent body count across frames");
        for (const auto& body : frame) {
            if (!body.is_array() || body.empty())
                throw parse_error(source_id + ": each body must be a joint array");
            if (joints < 0) joints = static_cast<int>(body.size());
            if (static_cast<int>(body.size()) != joints)
                throw parse_error(source_id + ": inconsistent joint count");
        }
    }

    SkeletonSequence seq;
    seq.frames = static_cast<int>(frames.size());
    seq.bodies = bodies;
    seq.joints_per_body = joints;
    seq.source_id = source_id;
    seq.coords.assign(static_cast<std::size_t>(seq.frames) * bodies * joints * 3, 0.0);
    seq.body_present.assign(static_cast<std::size_t>(seq.frames) * bodies, 1);

    for (int t = 0; t < seq.frames; ++t)
        for (int m = 0; m < bodies; ++m)
            for (int j = 0; j < joints; ++j) {
                const auto& v = frames[t][m][j];
                if (!v.is_array() || v.size() != 3)
                    throw parse_error(source_id + ": joint entries must be [x,y,z]");
                for (int k = 0; k < 3; ++k) {
                    if (!v[k].is_number())
                        throw parse_error(source_id + ": non-numeric coordinate");
                    const double value = v[k].get<double>();
                    if (!std::isfinite(value))
                        throw parse_error(source_id + ": non-finite coordinate");
                    seq.coord(t, m, j, k) = value;
                }
            }

    if (doc.contains("label")) {
        if (!doc["label"].is_number_integer())
            throw parse_error(source_id + ": label must be an integer");
        seq.label = doc["label"].get<int>();
    } else {
        seq.label = label_from_source_id(source_id);
    }
    return seq;
}

namespace {

// Sum over joint/coordinate channels of the per-channel variance across the
// frames where the body is tracked.
double body_variance(const SkeletonSequence& seq, int m) {
    std::vector<int> tracked;
    for (int t = 0; t < seq.frames; ++t)
        if (seq.present(t, m)) tracked.push_back(t);
    if (tracked.empty()) return 0.0;

    const int channels = seq.joints_per_body * 3;
    double total = 0.0;
    for (int ch = 0; ch < channels; ++ch) {
        const int j = ch / 3;
        const int k = ch % 3;
        double mean = 0.0;
        for (int t : tracked) mean += seq.coord(t, m, j, k);
        mean /= static_cast<double>(tracked.size());
        double var = 0.0;
        for (int t : tracked) {
            const double d = seq.coord(t, m, j, k) - mean;
            var += d * d;
        }
        total += var / static_cast<double>(tracked.size());
    }
    return total;
}

SkeletonSequence take_bodies(const SkeletonSequence& seq, const std::vector<int>& keep) {
    SkeletonSequence out;
    out.frames = seq.frames;
    out.bodies = static_cast<int>(keep.size());
    out.joints_per_body = seq.joints_per_body;
    out.label = seq.label;
    out.source_id = seq.source_id;
    out.coords.assign(static_cast<std::size_t>(out.frames) * out.bodies *
                          out.joints_per_body * 3,
                      0.0);
    out.body_present.assign(static_cast<std::size_t>(out.frames) * out.bodies, 0);
    for (int t = 0; t < out.frames; ++t)
        for (std::size_t i = 0; i < keep.size(); ++i) {
            const int m = keep[i];
            if (m < 0 || m >= seq.bodies) continue;  // padding slot stays zero
            out.body_present[static_cast<std::size_t>(t) * out.bodies + i] =
                seq.body_present[static_cast<std::size_t>(t) * seq.bodies + m];
            for (int j = 0; j < out.joints_per_body; ++j)
                for (int k = 0; k < 3; ++k)
                    out.coord(t, static_cast<int>(i), j, k) = seq.coord(t, m, j, k);
        }
    return out;
}

}  // namespace

SkeletonSequence select_bodies(const SkeletonSequence& seq, BodyMode mode) {
    if (seq.bodies < 1) throw validation_error("select_bodies: sequence has no bodies");

    std::vector<double> variances(seq.bodies);
    for (int m = 0; m < seq.bodies; ++m) variances[m] = body_variance(seq, m);

    // Body indices sorted by descending variance, ties to the lower index.
    std::vector<int> order(seq.bodies);
    for (int m = 0; m < seq.bodies; ++m) order[m] = m;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return variances[a] > variances[b]; });

    if (mode == BodyMode::kPrimary) {
        if (seq.bodies == 1) return seq;
        return take_bodies(seq, {order[0]});
    }
    std::vector<int> keep = {order[0], seq.bodies > 1 ? order[1] : -1};
    std::sort(keep.begin(), keep.end());
    if (keep[0] == -1) keep = {keep[1], -1};  // real body first, zero pad second
    return take_bodies(seq, keep);
}

SkeletonSequence resample_frames(const SkeletonSequence& seq, int target_frames) {
    if (target_frames < 4 || target_frames % 4 != 0)
        throw validation_error("resample_frames: invalid-target-length " +
                               std::to_string(target_frames) +
                               " (need T >= 4 and T divisible by 4)");
    if (seq.frames < 1) throw validation_error("resample_frames: empty sequence");

    SkeletonSequence out;
    out.frames = target_frames;
    out.bodies = seq.bodies;
    out.joints_per_body = seq.joints_per_body;
    out.label = seq.label;
    out.source_id = seq.source_id;
    out.coords.assign(static_cast<std::size_t>(target_frames) * seq.bodies *
                          seq.joints_per_body * 3,
                      0.0);
    out.body_present.assign(static_cast<std::size_t>(target_frames) * seq.bodies, 1);

    if (seq.frames == 1) {
        for (int t = 0; t < target_frames; ++t)
            for (int m = 0; m < seq.bodies; ++m) {
                out.body_present[static_cast<std::size_t>(t) * seq.bodies + m] =
                    seq.body_present[m];
                for (int j = 0; j < seq.joints_per_body; ++j)
                    for (int k = 0; k < 3; ++k)
                        out.coord(t, m, j, k) = seq.coord(0, m, j, k);
            }
        return out;
    }

    const double span = static_cast<double>(seq.frames - 1);
    for (int t = 0; t < target_frames; ++t) {
        const double pos = span * static_cast<double>(t) /
                           static_cast<double>(target_frames - 1);
        int lo = static_cast<int>(std::floor(pos));
        if (lo >= seq.frames - 1) lo = seq.frames - 2;
        const int hi = lo + 1;
        const double w = pos - static_cast<double>(lo);
        for (int m = 0; m < seq.bodies; ++m) {
            const bool tracked = seq.present(lo, m) || seq.present(hi, m);
            out.body_present[static_cast<std::size_t>(t) * seq.bodies + m] =
                tracked ? 1 : 0;
            for (int j = 0; j < seq.joints_per_body; ++j)
                for (int k = 0; k < 3; ++k) {
                    const double a = seq.coord(lo, m, j, k);
                    const double b = seq.coord(hi, m, j, k);
                    // a + (b-a)*w is exact for constants; endpoints handled
                    // separately so a coinciding grid reproduces inputs bit-for-bit.
                    out.coord(t, m, j, k) =
                        (w == 0.0) ? a : (w == 1.0 ? b : a + (b - a) * w);
                }
        }
    }
    return out;
}

FeatureMap raw_features(const SkeletonSequence& seq, bool center) {
    if (seq.bodies < 1 || seq.bodies > 2)
        throw validation_error(
            "raw_features: expected 1 or 2 bodies after selection, got " +
            std::to_string(seq.bodies));

    const int n = seq.bodies * seq.joints_per_body;
    FeatureMap map(3, n, seq.frames, 1, 1);
    for (int t = 0; t < seq.frames; ++t) {
        double origin[3] = {0.0, 0.0, 0.0};
        if (center)
            for (int k = 0; k < 3; ++k) origin[k] = seq.coord(t, 0, 0, k);
        for (int m = 0; m < seq.bodies; ++m)
            for (int j = 0; j < seq.joints_per_body; ++j)
                for (int k = 0; k < 3; ++k)
                    map.at(k, m * seq.joints_per_body + j, t) =
                        seq.coord(t, m, j, k) - origin[k];
    }
    return map;
}

std::optional<int> label_from_source_id(const std::string& id) {
    // Trailing action tag: "...A001" (NTU) or "..._A_1" (PKU segment ids).
    std::size_t pos = id.find_last_of("Aa");
    if (pos == std::string::npos) return std::nullopt;
    std::size_t digits = pos + 1;
    if (digits < id.size() && id[digits] == '_') ++digits;
    if (digits >= id.size()) return std::nullopt;
    int value = 0;
    const auto [end, ec] =
        std::from_chars(id.data() + digits, id.data() + id.size(), value);
    if (ec != std::errc() || end != id.data() + id.size()) return std::nullopt;
    return value;
}

}  // namespace skelmatch
