#include "compc/ply_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "compc/error.hpp"

namespace compc::io {

namespace {

static_assert(std::endian::native == std::endian::little, "PLY binary I/O assumes a little-endian host");

std::size_t type_size(const std::string& t) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" || t == "float32") return 4;
  if (t == "double" || t == "float64") return 8;
  throw IoError("PLY: unknown property type '" + t + "'");
}

template <typename T>
double load_as(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return static_cast<double>(v);
}

double decode(const std::string& t, const char* p) {
  if (t == "char" || t == "int8") return load_as<std::int8_t>(p);
  if (t == "uchar" || t == "uint8") return load_as<std::uint8_t>(p);
  if (t == "short" || t == "int16") return load_as<std::int16_t>(p);
  if (t == "ushort" || t == "uint16") return load_as<std::uint16_t>(p);
  if (t == "int" || t == "int32") return load_as<std::int32_t>(p);
  if (t == "uint" || t == "uint32") return load_as<std::uint32_t>(p);
  if (t == "float" || t == "float32") return load_as<float>(p);
  return load_as<double>(p);
}

struct Property {
  std::string name;
  std::string type;
  bool is_list = false;
  std::string count_type;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
};

double read_binary_scalar(std::istream& in, const std::string& type) {
  char buf[8];
  const auto n = type_size(type);
  if (!in.read(buf, static_cast<std::streamsize>(n))) throw IoError("PLY: unexpected end of binary data");
  return decode(type, buf);
}

}  // namespace

PlyData read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());

  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw IoError(path.string() + ": not a PLY file");

  bool ascii = false;
  std::vector<Element> elements;
  PlyData data;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") {
        ascii = true;
      } else if (fmt != "binary_little_endian") {
        throw IoError(path.string() + ": unsupported PLY format " + fmt);
      }
    } else if (key == "comment") {
      data.comments.push_back(line.size() > 8 ? line.substr(8) : std::string{});
    } else if (key == "element") {
      Element e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (key == "property") {
      if (elements.empty()) throw IoError(path.string() + ": property before element");
      Property p;
      std::string t;
      ls >> t;
      if (t == "list") {
        p.is_list = true;
        ls >> p.count_type >> p.type >> p.name;
      } else {
        p.type = t;
        ls >> p.name;
      }
      type_size(p.type);
      elements.back().properties.push_back(p);
    } else if (key == "end_header") {
      break;
    }
  }
  if (!in) throw IoError(path.string() + ": truncated PLY header");

  for (const auto& e : elements) {
    const bool is_vertex = e.name == "vertex";
    const bool is_face = e.name == "face";
    if (is_vertex) {
      data.vertex_count = e.count;
      for (const auto& p : e.properties)
        if (!p.is_list) data.vertex[p.name].reserve(e.count);
    }
    for (std::size_t r = 0; r < e.count; ++r) {
      std::istringstream row;
      if (ascii) {
        if (!std::getline(in, line)) throw IoError(path.string() + ": unexpected end of ASCII data");
        row.str(line);
      }
      for (const auto& p : e.properties) {
        auto scalar = [&](const std::string& type) {
          if (!ascii) return read_binary_scalar(in, type);
          double v;
          if (!(row >> v)) throw IoError(path.string() + ": malformed ASCII row");
          return v;
        };
        if (p.is_list) {
          const auto n = static_cast<std::size_t>(scalar(p.count_type));
          std::vector<std::uint32_t> list(n);
          for (auto& v : list) v = static_cast<std::uint32_t>(scalar(p.type));
          if (is_face && (p.name == "vertex_indices" || p.name == "vertex_index")) data.faces.push_back(std::move(list));
        } else {
          const double v = scalar(p.type);
          if (is_vertex) data.vertex[p.name].push_back(v);
        }
      }
    }
  }
  return data;
}

void write_ply(const std::filesystem::path& path, const std::vector<PlyProperty>& properties,
               const std::vector<std::string>& comments, PlyFormat format,
               const std::vector<std::vector<std::uint32_t>>& faces) {
  require(!properties.empty(), "write_ply: no properties");
  const std::size_t n = properties.front().values.size();
  for (const auto& p : properties) {
    require(p.values.size() == n, "write_ply: property length mismatch");
    require(p.type == "float" || p.type == "double" || p.type == "uchar", "write_ply: unsupported type " + p.type);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());

  const bool ascii = format == PlyFormat::kAscii;
  out << "ply\n" << (ascii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n");
  for (const auto& c : comments) out << "comment " << c << "\n";
  out << "element vertex " << n << "\n";
  for (const auto& p : properties) out << "property " << p.type << " " << p.name << "\n";
  if (!faces.empty()) out << "element face " << faces.size() << "\nproperty list uchar uint vertex_indices\n";
  out << "end_header\n";

  if (ascii) {
    out << std::setprecision(9);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < properties.size(); ++k) {
        const auto& p = properties[k];
        if (k) out << ' ';
        if (p.type == "uchar") {
          out << static_cast<int>(p.values[i]);
        } else if (p.type == "float") {
          out << static_cast<float>(p.values[i]);
        } else {
          out << std::setprecision(17) << p.values[i] << std::setprecision(9);
        }
      }
      out << '\n';
    }
    for (const auto& f : faces) {
      out << f.size();
      for (auto v : f) out << ' ' << v;
      out << '\n';
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      for (const auto& p : properties) {
        if (p.type == "float") {
          const float v = static_cast<float>(p.values[i]);
          out.write(reinterpret_cast<const char*>(&v), sizeof v);
        } else if (p.type == "double") {
          out.write(reinterpret_cast<const char*>(&p.values[i]), sizeof(double));
        } else {
          const auto v = static_cast<std::uint8_t>(p.values[i]);
          out.write(reinterpret_cast<const char*>(&v), 1);
        }
      }
    }
    for (const auto& f : faces) {
      const auto count = static_cast<std::uint8_t>(f.size());
      out.write(reinterpret_cast<const char*>(&count), 1);
      out.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(std::uint32_t)));
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

PointCloud read_point_cloud(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  auto ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(c));
  if (ext != ".ply") return read_xyz(path);

  const PlyData ply = read_ply(path);
  if (!ply.has("x") || !ply.has("y") || !ply.has("z")) throw IoError(path.string() + ": missing x/y/z");
  PointCloud cloud;
  cloud.points.reserve(ply.vertex_count);
  const auto &x = ply.vertex.at("x"), &y = ply.vertex.at("y"), &z = ply.vertex.at("z");
  for (std::size_t i = 0; i < ply.vertex_count; ++i) cloud.points.emplace_back(x[i], y[i], z[i]);
  if (ply.has("nx") && ply.has("ny") && ply.has("nz")) {
    const auto &nx = ply.vertex.at("nx"), &ny = ply.vertex.at("ny"), &nz = ply.vertex.at("nz");
    cloud.normals.reserve(ply.vertex_count);
    for (std::size_t i = 0; i < ply.vertex_count; ++i) {
      Vec3 n(nx[i], ny[i], nz[i]);
      const double len = n.norm();
      // float32 storage loses a little unit length
      cloud.normals.push_back(len > 0.0 ? Vec3(n / len) : n);
    }
  }
  return cloud;
}

void write_point_cloud(const std::filesystem::path& path, const PointCloud& cloud, PlyFormat format) {
  auto ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(c));
  if (ext == ".xyz" || ext == ".txt") {
    write_xyz(path, cloud);
    return;
  }
  std::vector<PlyProperty> props;
  const char* names[] = {"x", "y", "z", "nx", "ny", "nz"};
  const int columns = cloud.has_normals() ? 6 : 3;
  for (int c = 0; c < columns; ++c) {
    PlyProperty p{names[c], "float", {}};
    p.values.reserve(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) p.values.push_back(c < 3 ? cloud.points[i][c] : cloud.normals[i][c - 3]);
    props.push_back(std::move(p));
  }
  write_ply(path, props, {}, format);
}

PointCloud read_xyz(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  PointCloud cloud;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::vector<double> v;
    double x;
    while (ls >> x) v.push_back(x);
    if (v.empty()) continue;
    if (v.size() != 3 && v.size() != 6) throw IoError(path.string() + ": bad column count on line " + std::to_string(line_no));
    cloud.points.emplace_back(v[0], v[1], v[2]);
    if (v.size() == 6) cloud.normals.push_back(Vec3(v[3], v[4], v[5]).normalized());
  }
  if (!cloud.normals.empty() && cloud.normals.size() != cloud.points.size())
    throw IoError(path.string() + ": normals given for only some points");
  return cloud;
}

void write_xyz(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(9);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    out << p.x() << ' ' << p.y() << ' ' << p.z();
    if (cloud.has_normals()) out << ' ' << cloud.normals[i].x() << ' ' << cloud.normals[i].y() << ' ' << cloud.normals[i].z();
    out << '\n';
  }
}

}  // namespace compc::io
