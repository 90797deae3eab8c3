#include "ply.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>

static_assert(std::endian::native == std::endian::little, "PLY writer assumes a little-endian host");

namespace bsplat {

namespace {

enum class PropType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

std::optional<PropType> parse_type(const std::string& s) {
  static const std::map<std::string, PropType> table = {
      {"char", PropType::Int8},     {"int8", PropType::Int8},       {"uchar", PropType::UInt8},
      {"uint8", PropType::UInt8},   {"short", PropType::Int16},     {"int16", PropType::Int16},
      {"ushort", PropType::UInt16}, {"uint16", PropType::UInt16},   {"int", PropType::Int32},
      {"int32", PropType::Int32},   {"uint", PropType::UInt32},     {"uint32", PropType::UInt32},
      {"float", PropType::Float32}, {"float32", PropType::Float32}, {"double", PropType::Float64},
      {"float64", PropType::Float64}};
  auto it = table.find(s);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

std::size_t type_size(PropType t) {
  switch (t) {
    case PropType::Int8:
    case PropType::UInt8:
      return 1;
    case PropType::Int16:
    case PropType::UInt16:
      return 2;
    case PropType::Int32:
    case PropType::UInt32:
    case PropType::Float32:
      return 4;
    case PropType::Float64:
      return 8;
  }
  return 0;
}

template <class T>
T read_as(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

double decode(PropType t, const char* p) {
  switch (t) {
    case PropType::Int8:
      return read_as<std::int8_t>(p);
    case PropType::UInt8:
      return read_as<std::uint8_t>(p);
    case PropType::Int16:
      return read_as<std::int16_t>(p);
    case PropType::UInt16:
      return read_as<std::uint16_t>(p);
    case PropType::Int32:
      return read_as<std::int32_t>(p);
    case PropType::UInt32:
      return read_as<std::uint32_t>(p);
    case PropType::Float32:
      return read_as<float>(p);
    case PropType::Float64:
      return read_as<double>(p);
  }
  return 0.0;
}

struct Property {
  std::string name;
  PropType type;
  std::size_t offset;  // within a vertex record
};

struct Element {
  std::string name;
  std::uint64_t count = 0;
  std::vector<Property> properties;
  std::size_t stride = 0;
};

// Vertex table read column-wise, plus the byte offset of each record for
// error reporting.
struct VertexTable {
  std::uint64_t count = 0;
  std::vector<Property> properties;
  std::uint64_t data_offset = 0;
  std::size_t stride = 0;
  std::vector<char> bytes;

  const Property* find(const std::string& name) const {
    for (const auto& p : properties) {
      if (p.name == name) return &p;
    }
    return nullptr;
  }
  double value(const Property& p, std::uint64_t row) const {
    return decode(p.type, bytes.data() + row * stride + p.offset);
  }
  std::uint64_t offset_of(const Property& p, std::uint64_t row) const {
    return data_offset + row * stride + p.offset;
  }
};

VertexTable read_vertex_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'", 0);
  std::vector<char> file((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::size_t pos = 0;
  auto next_line = [&](std::uint64_t& line_start) -> std::optional<std::string> {
    line_start = pos;
    if (pos >= file.size()) return std::nullopt;
    std::size_t end = pos;
    while (end < file.size() && file[end] != '\n') ++end;
    if (end >= file.size()) return std::nullopt;
    std::string line(file.data() + pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = end + 1;
    return line;
  };

  std::uint64_t line_start = 0;
  auto magic = next_line(line_start);
  if (!magic || *magic != "ply") throw IoError("missing 'ply' magic", 0);

  bool have_format = false;
  std::vector<Element> elements;
  for (;;) {
    auto line = next_line(line_start);
    if (!line) throw IoError("unterminated PLY header", line_start);
    std::istringstream ss(*line);
    std::string keyword;
    ss >> keyword;
    if (keyword.empty() || keyword == "comment" || keyword == "obj_info") continue;
    if (keyword == "end_header") break;
    if (keyword == "format") {
      std::string fmt, version;
      ss >> fmt >> version;
      if (fmt != "binary_little_endian") throw IoError("unsupported PLY format '" + fmt + "'", line_start);
      have_format = true;
    } else if (keyword == "element") {
      Element e;
      long long count = -1;
      ss >> e.name >> count;
      if (e.name.empty() || count < 0 || ss.fail()) throw IoError("malformed element line", line_start);
      e.count = static_cast<std::uint64_t>(count);
      elements.push_back(std::move(e));
    } else if (keyword == "property") {
      if (elements.empty()) throw IoError("property before any element", line_start);
      std::string type_name, name;
      ss >> type_name;
      if (type_name == "list") throw IoError("list properties are not supported", line_start);
      ss >> name;
      auto type = parse_type(type_name);
      if (!type || name.empty()) throw IoError("malformed property line", line_start);
      auto& e = elements.back();
      e.properties.push_back(Property{name, *type, e.stride});
      e.stride += type_size(*type);
    } else {
      throw IoError("unknown header keyword '" + keyword + "'", line_start);
    }
  }
  if (!have_format) throw IoError("PLY header has no format line", line_start);

  VertexTable table;
  std::uint64_t offset = pos;
  bool found = false;
  for (const auto& e : elements) {
    const std::uint64_t bytes = e.count * e.stride;
    if (e.name == "vertex") {
      table.count = e.count;
      table.properties = e.properties;
      table.stride = e.stride;
      table.data_offset = offset;
      if (offset + bytes > file.size()) {
        throw IoError("vertex data truncated: expected " + std::to_string(e.count) + " records of " +
                          std::to_string(e.stride) + " bytes",
                      file.size());
      }
      table.bytes.assign(file.begin() + static_cast<std::ptrdiff_t>(offset),
                         file.begin() + static_cast<std::ptrdiff_t>(offset + bytes));
      found = true;
      break;
    }
    offset += bytes;
  }
  if (!found) throw IoError("PLY file has no vertex element", pos);
  if (table.data_offset + table.count * table.stride != file.size() && elements.size() == 1) {
    throw IoError("field-count mismatch: " + std::to_string(file.size() - table.data_offset) +
                      " data bytes for " + std::to_string(table.count) + " records of " +
                      std::to_string(table.stride) + " bytes",
                  table.data_offset + table.count * table.stride);
  }
  return table;
}

const Property& require(const VertexTable& t, const std::string& name) {
  const Property* p = t.find(name);
  if (!p) throw IoError("field-count mismatch: missing vertex property '" + name + "'", t.data_offset);
  return *p;
}

double finite_value(const VertexTable& t, const Property& p, std::uint64_t row) {
  const double v = t.value(p, row);
  if (!std::isfinite(v)) {
    throw IoError("non-finite value in property '" + p.name + "' of vertex " + std::to_string(row),
                  t.offset_of(p, row));
  }
  return v;
}

class RecordWriter {
 public:
  explicit RecordWriter(PlyPrecision precision) : precision_(precision) {}
  void put(double v) {
    if (precision_ == PlyPrecision::Float64) {
      append(v);
    } else {
      append(static_cast<float>(v));
    }
  }
  template <class T>
  void append(T v) {
    char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    buffer_.insert(buffer_.end(), raw, raw + sizeof(T));
  }
  const std::vector<char>& buffer() const { return buffer_; }

 private:
  PlyPrecision precision_;
  std::vector<char> buffer_;
};

void write_file(const std::filesystem::path& path, const std::string& header, const std::vector<char>& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing", 0);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'", header.size());
}

}  // namespace

void save_scene(const Scene& scene, const std::filesystem::path& path, PlyPrecision precision) {
  const char* type = precision == PlyPrecision::Float64 ? "double" : "float";
  std::ostringstream header;
  header << "ply\nformat binary_little_endian 1.0\n";
  header << "element vertex " << scene.primitives.size() << "\n";
  for (const char* name : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0",
                           "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"}) {
    header << "property " << type << " " << name << "\n";
  }
  header << "end_header\n";

  RecordWriter w(precision);
  for (const auto& g : scene.primitives) {
    for (int k = 0; k < 3; ++k) w.put(g.mean[k]);
    for (int k = 0; k < 3; ++k) w.put(0.0);
    for (int k = 0; k < 3; ++k) w.put(g.color_dc[k]);
    w.put(g.opacity_logit);
    for (int k = 0; k < 3; ++k) w.put(g.log_scale[k]);
    for (int k = 0; k < 4; ++k) w.put(g.rotation[k]);
  }
  write_file(path, header.str(), w.buffer());
}

Scene load_scene(const std::filesystem::path& path) {
  const VertexTable t = read_vertex_table(path);
  const std::array<const Property*, 3> mean = {&require(t, "x"), &require(t, "y"), &require(t, "z")};
  const std::array<const Property*, 3> dc = {&require(t, "f_dc_0"), &require(t, "f_dc_1"), &require(t, "f_dc_2")};
  const Property& opacity = require(t, "opacity");
  const std::array<const Property*, 3> scale = {&require(t, "scale_0"), &require(t, "scale_1"),
                                                &require(t, "scale_2")};
  const std::array<const Property*, 4> rot = {&require(t, "rot_0"), &require(t, "rot_1"), &require(t, "rot_2"),
                                              &require(t, "rot_3")};
  Scene scene;
  scene.primitives.resize(t.count);
  for (std::uint64_t i = 0; i < t.count; ++i) {
    auto& g = scene.primitives[i];
    for (int k = 0; k < 3; ++k) g.mean[k] = finite_value(t, *mean[k], i);
    for (int k = 0; k < 3; ++k) g.color_dc[k] = finite_value(t, *dc[k], i);
    g.opacity_logit = finite_value(t, opacity, i);
    for (int k = 0; k < 3; ++k) g.log_scale[k] = finite_value(t, *scale[k], i);
    for (int k = 0; k < 4; ++k) g.rotation[k] = finite_value(t, *rot[k], i);
    if (g.rotation.norm() == 0.0) throw IoError("zero quaternion at vertex " + std::to_string(i), t.offset_of(*rot[0], i));
  }
  scene.assignment.assign(scene.primitives.size(), Partition::kBackground);
  return scene;
}

PointCloud load_point_cloud(const std::filesystem::path& path) {
  const VertexTable t = read_vertex_table(path);
  const Property& x = require(t, "x");
  const Property& y = require(t, "y");
  const Property& z = require(t, "z");
  const Property* r = t.find("red");
  const Property* g = t.find("green");
  const Property* b = t.find("blue");
  const bool has_color = r && g && b;
  PointCloud cloud;
  cloud.positions.reserve(t.count);
  for (std::uint64_t i = 0; i < t.count; ++i) {
    cloud.positions.emplace_back(finite_value(t, x, i), finite_value(t, y, i), finite_value(t, z, i));
    if (has_color) {
      Vec3 c(finite_value(t, *r, i), finite_value(t, *g, i), finite_value(t, *b, i));
      if (r->type == PropType::UInt8) c /= 255.0;
      cloud.colors.push_back(c);
    }
  }
  return cloud;
}

void save_point_cloud(const PointCloud& cloud, const std::filesystem::path& path) {
  const bool has_color = cloud.colors.size() == cloud.positions.size() && !cloud.colors.empty();
  std::ostringstream header;
  header << "ply\nformat binary_little_endian 1.0\n";
  header << "element vertex " << cloud.positions.size() << "\n";
  header << "property double x\nproperty double y\nproperty double z\n";
  if (has_color) header << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  header << "end_header\n";
  RecordWriter w(PlyPrecision::Float64);
  for (std::size_t i = 0; i < cloud.positions.size(); ++i) {
    for (int k = 0; k < 3; ++k) w.put(cloud.positions[i][k]);
    if (has_color) {
      for (int k = 0; k < 3; ++k) {
        const double c = std::clamp(cloud.colors[i][k], 0.0, 1.0);
        w.append(static_cast<std::uint8_t>(std::lround(c * 255.0)));
      }
    }
  }
  write_file(path, header.str(), w.buffer());
}

}  // namespace bsplat
