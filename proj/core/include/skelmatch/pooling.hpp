#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "skelmatch/feature_map.hpp"

namespace skelmatch {

// One level of the spatial hierarchy: each group averages a set of node
// indices of the finer scale. Groups may overlap (a joint can contribute to
// several groups) and their union must cover every finer-scale node.
struct PoolingSpec {
    struct Group {
        std::string name;
        std::vector<int> members;  // 0-based indices into the finer scale
    };
    std::string name;
    std::vector<Group> groups;

    int coarse_count() const { return static_cast<int>(groups.size()); }
    // Largest member index + 1; the finer scale must have at least this many nodes.
    int min_fine_count() const;
    void validate(int fine_count) const;
};

// The built-in 25-joint hierarchy: 10 body parts (scale 1 -> 2) and
// 6 super-parts (scale 2 -> 3). Joint numbering follows the Kinect-v2
// 25-joint convention, converted to 0-based indices.
const PoolingSpec& builtin_part_spec();        // 25 joints -> 10 parts
const PoolingSpec& builtin_super_part_spec();  // 10 parts  ->  6 super-parts

// Two-body variant: the same tables applied per body on a 50-node map
// (second body's members offset by 25, group count doubled).
PoolingSpec duplicated_spec(const PoolingSpec& spec, int copies, int fine_offset);

// JSON round-trip: {"name": ..., "groups": [{"name": ..., "members": [...]}]}.
std::string pooling_spec_to_json(const PoolingSpec& spec);
PoolingSpec pooling_spec_from_json(std::istream& in);

// Unweighted mean over each group's members, per channel and frame.
// Increments spatial_scale.
FeatureMap spatial_pool(const FeatureMap& map, const PoolingSpec& spec);

// Window-2 stride-2 mean along frames; odd T replicates the last frame
// before averaging. Increments temporal_scale.
FeatureMap temporal_pool(const FeatureMap& map);

// The full spatial/temporal pyramid of one sequence. The scale-1 spatial map
// and the scale-1 temporal map are one object (`s1`).
struct ScalePyramid {
    FeatureMap s1, s2, s3;  // C x N x T, C x N2 x T, C x N3 x T
    FeatureMap t2, t3;      // C x N x T/2, C x N x T/4

    const FeatureMap& spatial(int level) const;   // level in {1,2,3}
    const FeatureMap& temporal(int level) const;  // level 1 aliases s1
};

// Pool a scale-(1,1) map into a pyramid. Maps with 25 nodes use the built-in
// tables, 50-node maps the per-body duplicated tables; any other width needs
// explicit specs.
ScalePyramid build_pyramid(const FeatureMap& map);
ScalePyramid build_pyramid(const FeatureMap& map, const PoolingSpec& part_spec,
                           const PoolingSpec& super_part_spec);

// Assemble a pyramid from independently produced per-scale maps (e.g. trained
// embeddings read from tensor files) instead of pooling. Shapes and scale tags
// are validated: equal channels everywhere, spatial levels share T with
// strictly decreasing N, temporal levels share N with T halving per level.
ScalePyramid assemble_pyramid(FeatureMap s1, FeatureMap s2, FeatureMap s3,
                              FeatureMap t2, FeatureMap t3);

}  // namespace skelmatch
