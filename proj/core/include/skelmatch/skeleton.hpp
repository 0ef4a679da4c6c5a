#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "skelmatch/feature_map.hpp"

namespace skelmatch {

// A tracked skeleton recording: T_raw frames x M bodies x N_j joints x (x,y,z),
// camera coordinates in meters. Frames that contained no body at all have
// already been dropped by the parsers; bodies missing from an individual frame
// are zero-filled and flagged in `body_present`.
struct SkeletonSequence {
    int frames = 0;           // T_raw
    int bodies = 0;           // M
    int joints_per_body = 0;  // N_j (25 for NTU / PKU recordings)
    std::vector<double> coords;        // ((t*M + m)*N_j + j)*3 + k
    std::vector<std::uint8_t> body_present;  // t*M + m, 1 if tracked in frame t
    std::optional<int> label;
    std::string source_id;

    std::size_t coord_index(int t, int m, int j, int k) const {
        return ((static_cast<std::size_t>(t) * bodies + m) * joints_per_body + j) * 3 + k;
    }
    double coord(int t, int m, int j, int k) const {
        return coords[coord_index(t, m, j, k)];
    }
    double& coord(int t, int m, int j, int k) {
        return coords[coord_index(t, m, j, k)];
    }
    bool present(int t, int m) const {
        return body_present[static_cast<std::size_t>(t) * bodies + m] != 0;
    }
};

enum class BodyMode { kPrimary, kBoth };

// Parse the NTU ".skeleton" text layout: a frame count, then per frame a body
// count and per body one header line, a joint count, and one line per joint
// whose first three fields are x y z (remaining columns are skipped).
// Frames whose body count is zero are dropped. Error messages carry the
// 1-based line number of the offending line.
SkeletonSequence parse_ntu_skeleton(std::istream& in,
                                    const std::string& source_id = "<stream>");

// JSON alternative: {"frames": [[[x,y,z] x N] x M] x T, "label": int}.
SkeletonSequence parse_json_sequence(std::istream& in,
                                     const std::string& source_id = "<stream>");

// kPrimary keeps the body with the highest total coordinate variance across
// its tracked frames (ties break to the lower body index); kBoth keeps two
// bodies, zero-filling a second body when only one was tracked.
SkeletonSequence select_bodies(const SkeletonSequence& seq, BodyMode mode);

// Linear interpolation of every coordinate channel onto `target_frames`
// uniformly spaced positions spanning [first frame, last frame]. A one-frame
// input is replicated. `target_frames` must be >= 4 and divisible by 4 so the
// temporal pyramid can halve it twice.
SkeletonSequence resample_frames(const SkeletonSequence& seq, int target_frames);

// Lay the coordinates out as a C=3 feature map at scale (1,1). With a single
// body the map has N = joints_per_body nodes; with two bodies their joints are
// stacked (N = 2 * joints_per_body). When `center` is set, the first body's
// joint 0 (spine base) position is subtracted from every joint per frame.
FeatureMap raw_features(const SkeletonSequence& seq, bool center);

// Class id inferred from a sample id ("S001C003P008R001A001" -> 1,
// "0003-L_A_1" -> 1), or nullopt when no action tag is present.
std::optional<int> label_from_source_id(const std::string& id);

}  // namespace skelmatch
