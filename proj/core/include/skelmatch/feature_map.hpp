#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "skelmatch/error.hpp"

namespace skelmatch {

// Dense C x N x T feature tensor (channels, nodes, frames), contiguous with
// the frame axis fastest, tagged with the spatial/temporal scale it lives at.
struct FeatureMap {
    int channels = 0;
    int joints = 0;
    int frames = 0;
    int spatial_scale = 1;
    int temporal_scale = 1;
    std::vector<double> data;  // size channels*joints*frames, (c,n,t) with t fastest

    FeatureMap() = default;
    FeatureMap(int c, int n, int t, int s_scale = 1, int t_scale = 1)
        : channels(c), joints(n), frames(t),
          spatial_scale(s_scale), temporal_scale(t_scale),
          data(static_cast<std::size_t>(c) * n * t, 0.0) {}

    std::size_t size() const { return data.size(); }

    std::size_t index(int c, int n, int t) const {
        return (static_cast<std::size_t>(c) * joints + n) * frames + t;
    }
    double at(int c, int n, int t) const { return data[index(c, n, t)]; }
    double& at(int c, int n, int t) { return data[index(c, n, t)]; }

    bool same_shape(const FeatureMap& other) const {
        return channels == other.channels && joints == other.joints &&
               frames == other.frames;
    }

    std::string shape_string() const {
        return std::to_string(channels) + "x" + std::to_string(joints) + "x" +
               std::to_string(frames);
    }
};

}  // namespace skelmatch
