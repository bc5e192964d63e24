#pragma once

// Procedural shape families: a common fuselage-and-wing body with a varying
// set of attached pods. Families differ only in their pods, so telling them
// apart requires looking at the pods.

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "distinct/geometry.hpp"
#include "distinct/random.hpp"

namespace distinct {

struct ShapeFamilySpec {
  std::string family_name;
  Vec3 body_semi_axes{1.0, 0.14, 0.14};  ///< fuselage ellipsoid along +x
  double wing_span = 1.5;
  double wing_chord = 0.32;
  double wing_thickness = 0.03;
  Vec3 pod_semi_axes{0.15, 0.15, 0.15};
  std::size_t pod_count = 0;
  std::vector<Vec3> pod_placement;  ///< pod centers in body coordinates
  double size_jitter = 0.05;        ///< relative, applied to body/wing/pod dimensions
  double placement_jitter = 0.03;   ///< absolute, per pod axis

  void validate() const;
};

struct DatasetRecord {
  std::string shape_id;
  std::string family_name;  ///< evaluation only; never consumed by training
  Mesh mesh;                ///< normalized with the master cloud's transform
  std::vector<std::uint8_t> face_is_pod;
  PointCloud master_cloud;  ///< 4 N points, unit-sphere normalized
  std::vector<std::uint8_t> substructure_mask;
};

struct Dataset {
  std::vector<DatasetRecord> records;
  std::size_t points_per_shape = 256;  ///< N

  std::size_t size() const { return records.size(); }
  std::vector<std::string> family_names() const;  ///< sorted, unique
  /// Family index per record, in family_names() order.
  std::vector<std::size_t> family_labels() const;
};

/// Fuselage + wing slabs + tail fin + pods. Pod faces are flagged; masks of
/// sampled points follow their source faces.
std::vector<DatasetRecord> generate_family(const ShapeFamilySpec& spec, std::size_t count, std::size_t master_points,
                                           Rng& rng);

using FamilyCount = std::pair<ShapeFamilySpec, std::size_t>;

/// Master clouds of 4 N points; record order shuffled deterministically from `seed`.
Dataset build_dataset(const std::vector<FamilyCount>& specs, std::size_t n, std::uint64_t seed);

struct ResampleOptions {
  double jitter_sigma = 0.01;
  double jitter_clip = 0.05;
};

struct ResampledView {
  PointCloud cloud;
  std::vector<std::size_t> source;  ///< master index of each point
};

/// N master points without replacement, each jittered.
ResampledView resample_view(const DatasetRecord& record, std::size_t n, Rng& rng, const ResampleOptions& opts = {});

ShapeFamilySpec twin_pod_spec();
ShapeFamilySpec quad_pod_spec();
ShapeFamilySpec tail_pod_spec();

/// "twin-vs-quad" or "quad-vs-tail", `count` shapes per family.
std::vector<FamilyCount> preset(const std::string& name, std::size_t count);

/// Order-sensitive digest of every mesh and cloud coordinate.
std::uint64_t dataset_digest(const Dataset& ds);

}  // namespace distinct
