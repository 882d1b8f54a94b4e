#pragma once

#include <isopoints/types.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace iso {

struct SynthConfig {
  std::string shape = "sphere";  // sphere | torus | box
  std::size_t n = 5000;
  double noise = 0.01;           // std of normal-direction jitter, as a fraction of D
  double outlier_frac = 0.05;
  double outlier_offset = 0.2;   // minimum |f| of an outlier, as a fraction of D
  double diagonal = 2.0 * std::sqrt(3.0);
  std::uint64_t seed = 0;
};

struct SynthCloud {
  OrientedPoints cloud;          // inliers first, then outliers
  std::vector<bool> is_outlier;
};

/// Samples a named shape, jitters inliers along their true normals and adds
/// uniform outliers in [-1,1]^3 with random unit normals.
SynthCloud synthesize(const SynthConfig& cfg);

}  // namespace iso
