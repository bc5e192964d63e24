#include "distinct/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "distinct/config.hpp"

namespace distinct {
namespace fs = std::filesystem;
namespace {

// --- little-endian byte encoding --------------------------------------------

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_bytes(std::vector<std::uint8_t>& out, const std::string& s) { out.insert(out.end(), s.begin(), s.end()); }

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xffffffffULL) throw FormatError(std::string("checkpoint: ") + what + " exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

void put_tensor(std::vector<std::uint8_t>& out, const std::string& name, const std::vector<std::size_t>& shape,
                const std::vector<float>& data) {
  put_u32(out, checked_u32(name.size(), "name length"));
  put_bytes(out, name);
  put_u32(out, checked_u32(shape.size(), "rank"));
  for (std::size_t d : shape) put_u32(out, checked_u32(d, "dimension"));
  for (float f : data) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

std::vector<float> to_f32(const std::vector<double>& v) {
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
  return out;
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ == b_.size(); }
  void need(std::size_t n, const char* what) const {
    if (b_.size() - pos_ < n) {
      throw FormatError("checkpoint truncated at byte " + std::to_string(pos_) + " while reading " + what);
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

struct RawTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<float> data;
};

RawTensor get_tensor(Reader& r) {
  RawTensor t;
  const std::size_t at = r.offset();
  const std::uint32_t len = r.u32("tensor name length");
  if (len > 4096) throw FormatError("checkpoint: implausible tensor name length at byte " + std::to_string(at));
  t.name = r.bytes(len, "tensor name");
  const std::uint32_t rank = r.u32("tensor rank");
  if (rank > 8) throw FormatError("checkpoint: implausible rank for '" + t.name + "' at byte " + std::to_string(at));
  std::size_t count = 1;
  for (std::uint32_t k = 0; k < rank; ++k) {
    t.shape.push_back(r.u32("tensor dimension"));
    count *= t.shape.back();
  }
  r.need(count * 4, "tensor data");
  t.data.resize(count);
  for (float& f : t.data) f = std::bit_cast<float>(r.u32("tensor data"));
  return t;
}

std::string join_ids(const std::vector<std::string>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i].find_first_of(",\n\r#=") != std::string::npos) {
      throw FormatError("shape id '" + ids[i] + "' contains a reserved character");
    }
    s += (i ? "," : "") + ids[i];
  }
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw FormatError("checkpoint: bad value for '" + key + "'");
  }
}

std::string fmt_float(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(static_cast<float>(v)));
  return buf;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> tokens(const std::string& line) {
  std::istringstream is(line);
  return {std::istream_iterator<std::string>(is), std::istream_iterator<std::string>()};
}

double parse_number(const std::string& tok, const fs::path& path, std::size_t lineno) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(tok, &pos);
    if (pos == tok.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + tok + "'");
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

// --- checkpoint --------------------------------------------------------------

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ck) {
  std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  put_u32(out, ck.version);
  const auto& p = ck.params;
  put_u32(out, checked_u32(p.values.size() + p.adam_m.size() + p.adam_v.size(), "tensor count"));
  for (const auto& [k, v] : p.values) put_tensor(out, k, v.shape(), v.values());
  for (const auto& [k, v] : p.adam_m) put_tensor(out, "adam.m/" + k, v.shape(), v.values());
  for (const auto& [k, v] : p.adam_v) put_tensor(out, "adam.v/" + k, v.shape(), v.values());

  const MemoryBank& b = ck.bank;
  put_tensor(out, "bank", {b.bank.rows, b.bank.cols}, to_f32(b.bank.data));
  std::vector<double> assign(b.assignments.begin(), b.assignments.end());
  put_tensor(out, "assignments", {assign.size()}, to_f32(assign));
  put_tensor(out, "prototypes", {b.prototypes.rows, b.prototypes.cols}, to_f32(b.prototypes.data));

  std::string block = serialize_config(ck.config);
  block += "ckpt.seed=" + std::to_string(ck.seed) + "\n";
  block += "ckpt.epoch=" + std::to_string(ck.epoch) + "\n";
  block += "ckpt.step=" + std::to_string(p.step) + "\n";
  block += "bank.epoch=" + std::to_string(b.epoch) + "\n";
  block += "bank.clusters=" + std::to_string(b.clusters) + "\n";
  block += "bank.shape_ids=" + join_ids(b.shape_ids) + "\n";
  put_u32(out, checked_u32(block.size(), "config block"));
  put_bytes(out, block);
  return out;
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const std::string magic = r.bytes(8, "magic");
  if (std::memcmp(magic.data(), kCheckpointMagic, 8) != 0) throw FormatError("checkpoint: bad magic at byte 0");
  Checkpoint ck;
  ck.version = r.u32("version");
  if (ck.version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(ck.version) + " at byte 8");
  }
  const std::uint32_t count = r.u32("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    RawTensor t = get_tensor(r);
    Tensor<float> tensor(t.shape);
    tensor.values() = std::move(t.data);
    TensorMap<float>* dst = &ck.params.values;
    std::string name = t.name;
    if (name.starts_with("adam.m/")) {
      dst = &ck.params.adam_m;
      name = name.substr(7);
    } else if (name.starts_with("adam.v/")) {
      dst = &ck.params.adam_v;
      name = name.substr(7);
    }
    if (!dst->emplace(name, std::move(tensor)).second) {
      throw FormatError("checkpoint: duplicate tensor '" + t.name + "' before byte " + std::to_string(r.offset()));
    }
  }
  const auto expect = [&](const char* name, std::size_t rank) {
    const std::size_t at = r.offset();
    RawTensor t = get_tensor(r);
    if (t.name != name || t.shape.size() != rank) {
      throw FormatError(std::string("checkpoint: expected tensor '") + name + "' at byte " + std::to_string(at));
    }
    return t;
  };
  RawTensor bank = expect("bank", 2);
  RawTensor assign = expect("assignments", 1);
  RawTensor protos = expect("prototypes", 2);
  ck.bank.bank = Matrix(bank.shape[0], bank.shape[1]);
  std::copy(bank.data.begin(), bank.data.end(), ck.bank.bank.data.begin());
  for (float a : assign.data) ck.bank.assignments.push_back(static_cast<std::size_t>(a));
  ck.bank.prototypes = Matrix(protos.shape[0], protos.shape[1]);
  std::copy(protos.data.begin(), protos.data.end(), ck.bank.prototypes.data.begin());

  const std::uint32_t len = r.u32("config length");
  const std::size_t block_at = r.offset();
  const std::string block = r.bytes(len, "config block");
  if (!r.done()) throw FormatError("checkpoint: trailing bytes at byte " + std::to_string(r.offset()));
  std::map<std::string, std::string> kv;
  try {
    kv = parse_key_values(block);
  } catch (const ConfigError& e) {
    throw FormatError("checkpoint: config block at byte " + std::to_string(block_at) + ": " + e.what());
  }
  std::map<std::string, std::string> cfg_kv;
  for (const auto& [k, v] : kv) {
    if (k == "ckpt.seed") ck.seed = parse_u64(k, v);
    else if (k == "ckpt.epoch") ck.epoch = parse_u64(k, v);
    else if (k == "ckpt.step") ck.params.step = parse_u64(k, v);
    else if (k == "bank.epoch") ck.bank.epoch = parse_u64(k, v);
    else if (k == "bank.clusters") ck.bank.clusters = parse_u64(k, v);
    else if (k == "bank.shape_ids") ck.bank.shape_ids = split(v, ',');
    else cfg_kv[k] = v;
  }
  try {
    ck.config = apply_config(TrainConfig{}, cfg_kv);
  } catch (const ConfigError& e) {
    throw FormatError("checkpoint: config block at byte " + std::to_string(block_at) + ": " + e.what());
  }
  return ck;
}

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) { write_file(path, serialize_checkpoint(ckpt)); }

Checkpoint load_checkpoint(const fs::path& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  try {
    return deserialize_checkpoint(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::uint64_t checkpoint_digest(const Checkpoint& ckpt) {
  const std::vector<std::uint8_t> bytes = serialize_checkpoint(ckpt);
  return hash_string(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

// --- files ---------------------------------------------------------------------

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write '" + tmp.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const fs::path& path) {
  const std::vector<std::uint8_t> b = read_file(path);
  return std::string(b.begin(), b.end());
}

// --- point formats ---------------------------------------------------------------

void write_xyz(const fs::path& path, const PointCloud& pc, bool full_precision) {
  const auto f = full_precision ? fmt_double : fmt_float;
  std::string s;
  for (const Vec3& p : pc.points) s += f(p.x) + " " + f(p.y) + " " + f(p.z) + "\n";
  write_text(path, s);
}

PointCloud read_xyz(const fs::path& path) {
  std::istringstream in(read_text(path));
  PointCloud pc;
  pc.shape_id = path.stem().string();
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    line = strip_cr(line);
    const auto t = tokens(line);
    if (t.empty() || t[0][0] == '#') continue;
    if (t.size() < 3) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 'x y z'");
    pc.points.push_back(
        {parse_number(t[0], path, lineno), parse_number(t[1], path, lineno), parse_number(t[2], path, lineno)});
  }
  return pc;
}

Rgb colormap(double d) {
  d = std::isfinite(d) ? std::clamp(d, 0.0, 1.0) : 0.0;
  double r = 0.0, g = 0.0, b = 0.0;
  if (d <= 0.5) {
    g = d / 0.5;
    b = 1.0 - g;
  } else {
    r = (d - 0.5) / 0.5;
    g = 1.0 - r;
  }
  const auto q = [](double c) { return static_cast<std::uint8_t>(std::lround(255.0 * c)); };
  return {q(r), q(g), q(b)};
}

void write_ply(const fs::path& path, const PointCloud& pc, const std::vector<double>* d, bool with_colors) {
  if (d && d->size() != pc.size()) throw std::invalid_argument("write_ply: field length differs from cloud size");
  if (with_colors && !d) throw std::invalid_argument("write_ply: colors need a distinctiveness field");
  std::string s = "ply\nformat ascii 1.0\ncomment distinct point cloud\n";
  s += "element vertex " + std::to_string(pc.size()) + "\n";
  s += "property float x\nproperty float y\nproperty float z\n";
  if (d) s += "property float distinctiveness\n";
  if (with_colors) s += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  s += "end_header\n";
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const Vec3& p = pc.points[i];
    s += fmt_float(p.x) + " " + fmt_float(p.y) + " " + fmt_float(p.z);
    if (d) s += " " + fmt_float((*d)[i]);
    if (with_colors) {
      const Rgb c = colormap((*d)[i]);
      s += " " + std::to_string(c[0]) + " " + std::to_string(c[1]) + " " + std::to_string(c[2]);
    }
    s += "\n";
  }
  write_text(path, s);
}

PlyData read_ply(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::size_t lineno = 0;
  const auto fail = [&](const std::string& msg) {
    throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + msg);
  };
  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<std::string> props;
  };
  std::vector<Element> elements;
  ++lineno;
  if (!std::getline(in, line) || strip_cr(line) != "ply") fail("missing 'ply' magic");
  bool ended = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = tokens(strip_cr(line));
    if (t.empty()) continue;
    if (t[0] == "format") {
      if (t.size() < 2 || t[1] != "ascii") fail("only ASCII PLY is supported");
    } else if (t[0] == "comment" || t[0] == "obj_info") {
    } else if (t[0] == "element") {
      if (t.size() != 3) fail("malformed element line");
      Element e;
      e.name = t[1];
      e.count = static_cast<std::size_t>(parse_number(t[2], path, lineno));
      elements.push_back(e);
    } else if (t[0] == "property") {
      if (elements.empty()) fail("property before any element");
      if (t.size() < 3) fail("malformed property line");
      elements.back().props.push_back(t.back());
    } else if (t[0] == "end_header") {
      ended = true;
      break;
    } else {
      fail("unexpected header line '" + t[0] + "'");
    }
  }
  if (!ended) fail("missing end_header");

  PlyData out;
  out.cloud.shape_id = path.stem().string();
  for (const Element& e : elements) {
    const bool vertex = e.name == "vertex";
    std::map<std::string, std::size_t> col;
    for (std::size_t k = 0; k < e.props.size(); ++k) col[e.props[k]] = k;
    if (vertex) {
      for (const char* req : {"x", "y", "z"})
        if (!col.contains(req)) fail(std::string("vertex element lacks property '") + req + "'");
      if (col.contains("distinctiveness")) out.distinctiveness.emplace();
      if (col.contains("red") && col.contains("green") && col.contains("blue")) out.colors.emplace();
    }
    std::size_t seen = 0;
    while (seen < e.count && std::getline(in, line)) {
      ++lineno;
      const auto t = tokens(strip_cr(line));
      if (t.empty()) continue;
      ++seen;
      if (!vertex) continue;
      if (t.size() != e.props.size()) fail("expected " + std::to_string(e.props.size()) + " values");
      const auto num = [&](const char* name) { return parse_number(t[col.at(name)], path, lineno); };
      out.cloud.points.push_back({num("x"), num("y"), num("z")});
      if (out.distinctiveness) out.distinctiveness->push_back(num("distinctiveness"));
      if (out.colors) {
        Rgb c{};
        const char* names[3] = {"red", "green", "blue"};
        for (int k = 0; k < 3; ++k) {
          const double v = num(names[k]);
          if (v < 0 || v > 255 || v != std::floor(v)) fail("color channel out of range");
          c[k] = static_cast<std::uint8_t>(v);
        }
        out.colors->push_back(c);
      }
    }
    if (seen != e.count) {
      throw FormatError(path.string() + ": element '" + e.name + "' declares " + std::to_string(e.count) +
                        " entries but the file has " + std::to_string(seen));
    }
  }
  while (std::getline(in, line)) {
    ++lineno;
    if (!tokens(strip_cr(line)).empty()) fail("data after the last declared element");
  }
  return out;
}

Mesh read_obj(const fs::path& path) {
  std::istringstream in(read_text(path));
  Mesh mesh;
  std::string line;
  std::vector<std::array<long long, 3>> raw_faces;
  std::vector<std::size_t> face_lines;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    const auto t = tokens(strip_cr(line));
    if (t.empty() || t[0][0] == '#') continue;
    if (t[0] == "v") {
      if (t.size() < 4) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 'v x y z'");
      mesh.vertices.push_back(
          {parse_number(t[1], path, lineno), parse_number(t[2], path, lineno), parse_number(t[3], path, lineno)});
    } else if (t[0] == "f") {
      if (t.size() != 4) {
        throw FormatError(path.string() + ":" + std::to_string(lineno) + ": only triangular faces are supported");
      }
      std::array<long long, 3> f{};
      for (int k = 0; k < 3; ++k) {
        const std::string idx = t[1 + k].substr(0, t[1 + k].find('/'));
        try {
          std::size_t pos = 0;
          f[k] = std::stoll(idx, &pos);
          if (pos != idx.size() || f[k] == 0) throw std::invalid_argument(idx);
        } catch (const std::exception&) {
          throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad face index '" + t[1 + k] + "'");
        }
        // Negative indices count back from the vertices read so far.
        if (f[k] < 0) f[k] += static_cast<long long>(mesh.vertices.size()) + 1;
      }
      raw_faces.push_back(f);
      face_lines.push_back(lineno);
    }
  }
  for (std::size_t i = 0; i < raw_faces.size(); ++i) {
    std::array<std::uint32_t, 3> f{};
    for (int k = 0; k < 3; ++k) {
      const long long v = raw_faces[i][k];
      if (v < 1 || v > static_cast<long long>(mesh.vertices.size())) {
        throw FormatError(path.string() + ":" + std::to_string(face_lines[i]) + ": face index out of range");
      }
      f[k] = static_cast<std::uint32_t>(v - 1);
    }
    mesh.faces.push_back(f);
  }
  return mesh;
}

void write_obj(const fs::path& path, const Mesh& mesh) {
  std::string s;
  for (const Vec3& v : mesh.vertices) s += "v " + fmt_double(v.x) + " " + fmt_double(v.y) + " " + fmt_double(v.z) + "\n";
  for (const auto& f : mesh.faces) {
    s += "f " + std::to_string(f[0] + 1) + " " + std::to_string(f[1] + 1) + " " + std::to_string(f[2] + 1) + "\n";
  }
  write_text(path, s);
}

PointCloud read_cloud(const fs::path& path, std::size_t obj_samples, std::uint64_t seed) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  PointCloud pc;
  if (ext == ".xyz" || ext == ".txt") {
    pc = read_xyz(path);
  } else if (ext == ".ply") {
    pc = read_ply(path).cloud;
  } else if (ext == ".obj") {
    Mesh mesh = read_obj(path);
    validate(mesh);
    Rng rng(derive_seed(seed, {hash_string(path.filename().string())}));
    pc = surface_sample(mesh, obj_samples, rng);
  } else {
    throw FormatError("unsupported point file extension '" + ext + "' for '" + path.string() + "'");
  }
  pc.shape_id = path.stem().string();
  validate(pc);
  return pc;
}

// --- tables ---------------------------------------------------------------------

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string s = "\"";
  for (char c : field) s += c == '"' ? std::string("\"\"") : std::string(1, c);
  return s + "\"";
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::string s;
  const auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + csv_escape(r[i]);
    s += "\n";
  };
  line(header);
  for (const auto& r : rows) {
    if (r.size() != header.size()) throw std::invalid_argument("write_csv: row width differs from header");
    line(r);
  }
  write_text(path, s);
}

void write_metrics_log(const fs::path& path, const TrainLog& log) {
  std::vector<std::vector<std::string>> rows;
  for (const BatchRecord& r : log.rows) {
    rows.push_back({std::to_string(r.epoch), std::to_string(r.batch), fmt_double(r.loss.cluster_term),
                    fmt_double(r.loss.contrastive_term), fmt_double(r.loss.weight_decay_term),
                    fmt_double(r.loss.total), std::to_string(r.assignment_changes)});
  }
  write_csv(path, {"epoch", "batch", "cluster_term", "contrastive_term", "decay", "total", "assignment_changes"},
            rows);
}

// --- dataset directory --------------------------------------------------------------

void save_dataset(const fs::path& dir, const Dataset& ds) {
  fs::create_directories(dir);
  std::vector<std::vector<std::string>> manifest;
  for (const DatasetRecord& r : ds.records) {
    join_ids({r.shape_id});
    manifest.push_back({r.shape_id, r.family_name});
    write_xyz(dir / (r.shape_id + ".xyz"), r.master_cloud, true);
    write_obj(dir / (r.shape_id + ".obj"), r.mesh);
    std::string mask, facemask;
    for (std::uint8_t m : r.substructure_mask) mask += m ? "1\n" : "0\n";
    for (std::uint8_t m : r.face_is_pod) facemask += m ? "1\n" : "0\n";
    write_text(dir / (r.shape_id + ".mask"), mask);
    write_text(dir / (r.shape_id + ".facemask"), facemask);
  }
  write_csv(dir / "manifest.csv", {"shape_id", "family"}, manifest);
  char digest[32];
  std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(dataset_digest(ds)));
  write_text(dir / "dataset.txt", "points_per_shape=" + std::to_string(ds.points_per_shape) +
                                      "\ncount=" + std::to_string(ds.size()) + "\ndigest=" + digest + "\n");
}

namespace {

std::vector<std::uint8_t> read_flags(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::vector<std::uint8_t> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    line = strip_cr(line);
    if (line.empty()) continue;
    if (line != "0" && line != "1") throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 0 or 1");
    out.push_back(line == "1");
  }
  return out;
}

}  // namespace

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw FormatError("dataset directory '" + dir.string() + "' does not exist");
  std::map<std::string, std::string> meta;
  try {
    meta = parse_key_values(read_text(dir / "dataset.txt"));
  } catch (const ConfigError& e) {
    throw FormatError((dir / "dataset.txt").string() + ": " + e.what());
  }
  if (!meta.contains("points_per_shape")) throw FormatError("dataset.txt lacks points_per_shape");
  Dataset ds;
  ds.points_per_shape = parse_u64("points_per_shape", meta["points_per_shape"]);
  std::istringstream in(read_text(dir / "manifest.csv"));
  std::string line;
  std::getline(in, line);
  if (strip_cr(line) != "shape_id,family") throw FormatError("manifest.csv: unexpected header");
  for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto cols = split(line, ',');
    if (cols.size() != 2) throw FormatError("manifest.csv:" + std::to_string(lineno) + ": expected shape_id,family");
    DatasetRecord r;
    r.shape_id = cols[0];
    r.family_name = cols[1];
    r.master_cloud = read_xyz(dir / (r.shape_id + ".xyz"));
    r.master_cloud.shape_id = r.shape_id;
    r.mesh = read_obj(dir / (r.shape_id + ".obj"));
    r.substructure_mask = read_flags(dir / (r.shape_id + ".mask"));
    r.face_is_pod = read_flags(dir / (r.shape_id + ".facemask"));
    if (r.substructure_mask.size() != r.master_cloud.size()) {
      throw FormatError(r.shape_id + ".mask: length differs from the master cloud");
    }
    if (r.face_is_pod.size() != r.mesh.faces.size()) {
      throw FormatError(r.shape_id + ".facemask: length differs from the face count");
    }
    ds.records.push_back(std::move(r));
  }
  if (meta.contains("count") && parse_u64("count", meta["count"]) != ds.size()) {
    throw FormatError("dataset.txt count differs from manifest.csv");
  }
  if (meta.contains("digest")) {
    char digest[32];
    std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(dataset_digest(ds)));
    if (meta["digest"] != digest) throw FormatError("dataset digest mismatch: files were modified");
  }
  return ds;
}

}  // namespace distinct
