#pragma once

// Persistence: checkpoint container, point/field formats, OBJ meshes, CSV
// tables and the on-disk dataset layout. Every writer is atomic (temporary
// file, then rename).

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "distinct/geometry.hpp"
#include "distinct/pipeline.hpp"
#include "distinct/synth.hpp"

namespace distinct {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[8] = {'D', '3', 'D', 'C', 'K', 'P', 'T', '1'};

/// Binary container (little-endian):
///   "D3DCKPT1", u32 version, u32 tensor count,
///   tensors {u32 name length, name, u32 rank, u32 dims..., f32 data},
///   tensors "bank", "assignments", "prototypes" in the same encoding,
///   u32 length + UTF-8 key=value block (config and checkpoint state).
/// Parameter tensors are followed by the Adam moments as "adam.m/<name>" and
/// "adam.v/<name>".
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
/// Throws FormatError naming the byte offset on bad magic, version or truncation.
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// FNV-1a over the serialized bytes.
std::uint64_t checkpoint_digest(const Checkpoint& ckpt);

/// Whole-file helpers; write_file is atomic.
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// One "x y z" line per point. f32 precision unless full_precision.
void write_xyz(const std::filesystem::path& path, const PointCloud& pc, bool full_precision = false);
/// Blank lines and '#' comments are skipped; malformed lines throw with the line number.
PointCloud read_xyz(const std::filesystem::path& path);

using Rgb = std::array<std::uint8_t, 3>;

/// 0 -> blue, 0.5 -> green, 1 -> red, linear in between; channels are
/// round(255 * c). Values outside [0, 1] are clamped.
Rgb colormap(double d);

struct PlyData {
  PointCloud cloud;
  std::optional<std::vector<double>> distinctiveness;
  std::optional<std::vector<Rgb>> colors;
};

/// ASCII PLY with float x, y, z, an optional float "distinctiveness" property
/// and optional uchar red, green, blue.
void write_ply(const std::filesystem::path& path, const PointCloud& pc, const std::vector<double>* d = nullptr,
               bool with_colors = false);
PlyData read_ply(const std::filesystem::path& path);

/// Vertices and triangular faces ("f a b c", "f a/t/n ..." and negative
/// indices accepted). Non-triangular faces throw with the line number.
Mesh read_obj(const std::filesystem::path& path);
void write_obj(const std::filesystem::path& path, const Mesh& mesh);

/// Point cloud from any supported file: .xyz, .ply, or .obj (surface-sampled
/// to `obj_samples` points with `seed`).
PointCloud read_cloud(const std::filesystem::path& path, std::size_t obj_samples = 2048, std::uint64_t seed = 0);

std::string csv_escape(const std::string& field);
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

/// Columns: epoch, batch, cluster_term, contrastive_term, decay, total, assignment_changes.
void write_metrics_log(const std::filesystem::path& path, const TrainLog& log);

/// Layout: dataset.txt (points_per_shape, count, digest), manifest.csv
/// (shape_id, family), and per shape <id>.xyz (master cloud, full precision),
/// <id>.obj, <id>.mask (per master point), <id>.facemask (per face).
void save_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace distinct
