#include "skelmatch/pooling.hpp"

#include <algorithm>
#include <istream>
#include <set>

#include <nlohmann/json.hpp>

namespace skelmatch {

int PoolingSpec::min_fine_count() const {
    int max_index = -1;
    for (const auto& g : groups)
        for (int m : g.members) max_index = std::max(max_index, m);
    return max_index + 1;
}

void PoolingSpec::validate(int fine_count) const {
    if (groups.empty()) throw validation_error("pooling spec '" + name + "' has no groups");
    std::set<int> covered;
    for (const auto& g : groups) {
        if (g.members.empty())
            throw validation_error("group '" + g.name + "' in spec '" + name +
                                   "' has no members");
        for (int m : g.members) {
            if (m < 0 || m >= fine_count)
                throw validation_error("group '" + g.name + "' in spec '" + name +
                                       "' references node " + std::to_string(m) +
                                       " outside the finer scale (0.." +
                                       std::to_string(fine_count - 1) + ")");
            covered.insert(m);
        }
    }
    if (static_cast<int>(covered.size()) != fine_count)
        throw validation_error("spec '" + name + "' covers " +
                               std::to_string(covered.size()) + " of " +
                               std::to_string(fine_count) + " finer-scale nodes");
}

namespace {

PoolingSpec::Group group_1based(std::string name, std::initializer_list<int> joints) {
    PoolingSpec::Group g;
    g.name = std::move(name);
    for (int j : joints) g.members.push_back(j - 1);
    return g;
}

PoolingSpec make_part_spec() {
    PoolingSpec spec;
    spec.name = "ntu25-parts";
    spec.groups = {
        group_1based("Neck", {3, 4, 21}),
        group_1based("Trunk", {1, 2, 5, 9, 13, 17}),
        group_1based("Right arm", {9, 10, 11}),
        group_1based("Right hand", {12, 24, 25}),
        group_1based("Left arm", {5, 6, 7}),
        group_1based("Left hand", {8, 22, 23}),
        group_1based("Right leg", {17, 18, 19}),
        group_1based("Right foot", {19, 20}),
        group_1based("Left leg", {13, 14, 15}),
        group_1based("Left foot", {15, 16}),
    };
    return spec;
}

PoolingSpec make_super_part_spec() {
    PoolingSpec spec;
    spec.name = "ntu25-super-parts";
    spec.groups = {
        group_1based("Neck", {1}),
        group_1based("Trunk", {2}),
        group_1based("Right upper limb", {3, 4}),
        group_1based("Left upper limb", {5, 6}),
        group_1based("Right lower limb", {7, 8}),
        group_1based("Left lower limb", {9, 10}),
    };
    return spec;
}

}  // namespace

const PoolingSpec& builtin_part_spec() {
    static const PoolingSpec spec = make_part_spec();
    return spec;
}

const PoolingSpec& builtin_super_part_spec() {
    static const PoolingSpec spec = make_super_part_spec();
    return spec;
}

PoolingSpec duplicated_spec(const PoolingSpec& spec, int copies, int fine_offset) {
    PoolingSpec out;
    out.name = spec.name + "-x" + std::to_string(copies);
    for (int c = 0; c < copies; ++c)
        for (const auto& g : spec.groups) {
            PoolingSpec::Group dup;
            dup.name = g.name + (copies > 1 ? "/" + std::to_string(c + 1) : "");
            for (int m : g.members) dup.members.push_back(m + c * fine_offset);
            out.groups.push_back(std::move(dup));
        }
    return out;
}

std::string pooling_spec_to_json(const PoolingSpec& spec) {
    nlohmann::json doc;
    doc["name"] = spec.name;
    doc["groups"] = nlohmann::json::array();
    for (const auto& g : spec.groups)
        doc["groups"].push_back({{"name", g.name}, {"members", g.members}});
    return doc.dump(2);
}

PoolingSpec pooling_spec_from_json(std::istream& in) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("pooling spec: ") + e.what());
    }
    PoolingSpec spec;
    if (!doc.is_object() || !doc.contains("groups") || !doc["groups"].is_array())
        throw parse_error("pooling spec: expected object with a 'groups' array");
    spec.name = doc.value("name", std::string("custom"));
    for (const auto& g : doc["groups"]) {
        PoolingSpec::Group group;
        group.name = g.value("name", std::string());
        if (!g.contains("members") || !g["members"].is_array())
            throw parse_error("pooling spec: group without 'members' array");
        for (const auto& m : g["members"]) {
            if (!m.is_number_integer())
                throw parse_error("pooling spec: non-integer member index");
            group.members.push_back(m.get<int>());
        }
        spec.groups.push_back(std::move(group));
    }
    if (spec.min_fine_count() < 1) throw parse_error("pooling spec: no members");
    return spec;
}

FeatureMap spatial_pool(const FeatureMap& map, const PoolingSpec& spec) {
    spec.validate(map.joints);
    FeatureMap out(map.channels, spec.coarse_count(), map.frames,
                   map.spatial_scale + 1, map.temporal_scale);
    for (int c = 0; c < map.channels; ++c)
        for (int g = 0; g < spec.coarse_count(); ++g) {
            const auto& members = spec.groups[g].members;
            const double inv = 1.0 / static_cast<double>(members.size());
            for (int t = 0; t < map.frames; ++t) {
                double sum = 0.0;
                for (int m : members) sum += map.at(c, m, t);
                out.at(c, g, t) = sum * inv;
            }
        }
    return out;
}

FeatureMap temporal_pool(const FeatureMap& map) {
    if (map.frames < 2)
        throw validation_error("temporal_pool: too-short, need at least 2 frames");
    const int out_frames = (map.frames + 1) / 2;
    FeatureMap out(map.channels, map.joints, out_frames, map.spatial_scale,
                   map.temporal_scale + 1);
    for (int c = 0; c < map.channels; ++c)
        for (int n = 0; n < map.joints; ++n)
            for (int t = 0; t < out_frames; ++t) {
                const int a = 2 * t;
                const int b = std::min(2 * t + 1, map.frames - 1);  // replicate last
                out.at(c, n, t) = 0.5 * (map.at(c, n, a) + map.at(c, n, b));
            }
    return out;
}

const FeatureMap& ScalePyramid::spatial(int level) const {
    switch (level) {
        case 1: return s1;
        case 2: return s2;
        case 3: return s3;
        default: throw validation_error("spatial level out of range");
    }
}

const FeatureMap& ScalePyramid::temporal(int level) const {
    switch (level) {
        case 1: return s1;
        case 2: return t2;
        case 3: return t3;
        default: throw validation_error("temporal level out of range");
    }
}

ScalePyramid build_pyramid(const FeatureMap& map) {
    if (map.joints == 25)
        return build_pyramid(map, builtin_part_spec(), builtin_super_part_spec());
    if (map.joints == 50)
        return build_pyramid(map, duplicated_spec(builtin_part_spec(), 2, 25),
                             duplicated_spec(builtin_super_part_spec(), 2, 10));
    throw validation_error("build_pyramid: no built-in pooling spec for " +
                           std::to_string(map.joints) +
                           " nodes; pass explicit specs");
}

ScalePyramid build_pyramid(const FeatureMap& map, const PoolingSpec& part_spec,
                           const PoolingSpec& super_part_spec) {
    if (map.spatial_scale != 1 || map.temporal_scale != 1)
        throw validation_error("build_pyramid: input must be a scale-(1,1) map, got (" +
                               std::to_string(map.spatial_scale) + "," +
                               std::to_string(map.temporal_scale) + ")");
    if (map.frames < 4)
        throw validation_error("build_pyramid: need at least 4 frames, got " +
                               std::to_string(map.frames));
    ScalePyramid pyr;
    pyr.s1 = map;
    pyr.s2 = spatial_pool(pyr.s1, part_spec);
    pyr.s3 = spatial_pool(pyr.s2, super_part_spec);
    pyr.t2 = temporal_pool(pyr.s1);
    pyr.t3 = temporal_pool(pyr.t2);
    return pyr;
}

ScalePyramid assemble_pyramid(FeatureMap s1, FeatureMap s2, FeatureMap s3,
                              FeatureMap t2, FeatureMap t3) {
    auto expect_scale = [](const FeatureMap& m, int s, int t, const char* which) {
        if (m.spatial_scale != s || m.temporal_scale != t)
            throw validation_error(std::string("assemble_pyramid: ") + which +
                                   " tagged (" + std::to_string(m.spatial_scale) + "," +
                                   std::to_string(m.temporal_scale) + "), expected (" +
                                   std::to_string(s) + "," + std::to_string(t) + ")");
    };
    expect_scale(s1, 1, 1, "s1");
    expect_scale(s2, 2, 1, "s2");
    expect_scale(s3, 3, 1, "s3");
    expect_scale(t2, 1, 2, "t2");
    expect_scale(t3, 1, 3, "t3");

    const int c = s1.channels;
    for (const FeatureMap* m : {&s2, &s3, &t2, &t3})
        if (m->channels != c)
            throw validation_error("assemble_pyramid: channel count mismatch (" +
                                   std::to_string(m->channels) + " vs " +
                                   std::to_string(c) + ")");
    if (s2.frames != s1.frames || s3.frames != s1.frames)
        throw validation_error("assemble_pyramid: spatial levels must share T");
    if (!(s1.joints > s2.joints && s2.joints > s3.joints))
        throw validation_error("assemble_pyramid: spatial node counts must decrease");
    if (t2.joints != s1.joints || t3.joints != s1.joints)
        throw validation_error("assemble_pyramid: temporal levels must share N");
    if (t2.frames != (s1.frames + 1) / 2 || t3.frames != (t2.frames + 1) / 2)
        throw validation_error("assemble_pyramid: temporal levels must halve T");

    ScalePyramid pyr;
    pyr.s1 = std::move(s1);
    pyr.s2 = std::move(s2);
    pyr.s3 = std::move(s3);
    pyr.t2 = std::move(t2);
    pyr.t3 = std::move(t3);
    return pyr;
}

}  // namespace skelmatch
