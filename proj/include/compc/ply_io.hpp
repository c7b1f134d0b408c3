#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "compc/point_cloud.hpp"

namespace compc::io {

// Generic view of a PLY file: every scalar vertex property as doubles, the
// optional face index lists, and header comments.
struct PlyData {
  std::size_t vertex_count = 0;
  std::map<std::string, std::vector<double>> vertex;
  std::vector<std::vector<std::uint32_t>> faces;
  std::vector<std::string> comments;

  bool has(const std::string& name) const { return vertex.count(name) != 0; }
};

// ASCII and binary_little_endian are supported.
PlyData read_ply(const std::filesystem::path& path);

enum class PlyFormat { kBinaryLittleEndian, kAscii };

struct PlyProperty {
  std::string name;
  std::string type;  // "float", "double" or "uchar"
  std::vector<double> values;
};

// Writes one vertex element with the given scalar properties (all equal length).
void write_ply(const std::filesystem::path& path, const std::vector<PlyProperty>& properties,
               const std::vector<std::string>& comments = {}, PlyFormat format = PlyFormat::kBinaryLittleEndian,
               const std::vector<std::vector<std::uint32_t>>& faces = {});

// Point clouds: x,y,z (+ nx,ny,nz when present) as float32.
PointCloud read_point_cloud(const std::filesystem::path& path);  // .ply or whitespace XYZ text
void write_point_cloud(const std::filesystem::path& path, const PointCloud& cloud,
                       PlyFormat format = PlyFormat::kBinaryLittleEndian);

PointCloud read_xyz(const std::filesystem::path& path);
void write_xyz(const std::filesystem::path& path, const PointCloud& cloud);

}  // namespace compc::io
