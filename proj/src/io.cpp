#include <isopoints/io.hpp>

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace iso {

namespace {

std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
  if (!f) throw IoError("cannot open " + path + " for writing");
  return f;
}

std::ifstream open_in(const std::string& path, bool binary = false) {
  std::ifstream f(path, binary ? std::ios::binary : std::ios::in);
  if (!f) throw IoError("cannot open " + path);
  return f;
}

void check_written(std::ostream& out, const std::string& what) {
  out.flush();
  if (!out) throw IoError("write failed: " + what);
}

std::string fmt9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f32(std::ostream& out, double v) { put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v))); }

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw IoError("truncated weights file");
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

double get_f32(std::istream& in) { return static_cast<double>(std::bit_cast<float>(get_u32(in))); }

}  // namespace

std::string format_real(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void write_ply(std::ostream& out, const OrientedPoints& cloud) {
  const bool normals = cloud.has_normals();
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  if (normals) out << "property float nx\nproperty float ny\nproperty float nz\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3& p = cloud.points[i];
    out << fmt9(p.x()) << ' ' << fmt9(p.y()) << ' ' << fmt9(p.z());
    if (normals) {
      const Vec3& n = cloud.normals[i];
      out << ' ' << fmt9(n.x()) << ' ' << fmt9(n.y()) << ' ' << fmt9(n.z());
    }
    out << '\n';
  }
}

void write_ply(const std::string& path, const OrientedPoints& cloud) {
  auto f = open_out(path);
  write_ply(f, cloud);
  check_written(f, path);
}

OrientedPoints read_ply(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) throw IoError("not a PLY file");
  std::size_t count = 0;
  bool in_vertex = false;
  bool have_count = false;
  std::vector<std::string> props;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string kind;
      ls >> kind;
      if (kind != "ascii") throw IoError("only ASCII PLY is supported");
    } else if (word == "element") {
      std::string name;
      ls >> name;
      in_vertex = name == "vertex";
      if (in_vertex) {
        if (!(ls >> count)) throw IoError("bad vertex count");
        have_count = true;
      }
    } else if (word == "property" && in_vertex) {
      std::string type, name;
      ls >> type;
      if (type == "list") throw IoError("list properties on vertices are not supported");
      ls >> name;
      props.push_back(name);
    } else if (word == "end_header") {
      break;
    }
  }
  if (!have_count) throw IoError("PLY header has no vertex element");
  auto find = [&](const char* n) -> int {
    for (std::size_t i = 0; i < props.size(); ++i)
      if (props[i] == n) return static_cast<int>(i);
    return -1;
  };
  const int ix = find("x"), iy = find("y"), iz = find("z");
  const int inx = find("nx"), iny = find("ny"), inz = find("nz");
  if (ix < 0 || iy < 0 || iz < 0) throw IoError("PLY vertices lack x y z");
  const bool normals = inx >= 0 && iny >= 0 && inz >= 0;

  OrientedPoints out;
  out.points.reserve(count);
  std::vector<double> row(props.size());
  for (std::size_t v = 0; v < count; ++v) {
    for (auto& x : row)
      if (!(in >> x)) throw IoError("truncated PLY vertex data");
    out.points.emplace_back(row[ix], row[iy], row[iz]);
    if (normals) out.normals.emplace_back(row[inx], row[iny], row[inz]);
  }
  return out;
}

OrientedPoints read_ply(const std::string& path) {
  auto f = open_in(path);
  return read_ply(f);
}

void write_weights(std::ostream& out, const SirenNetwork& net) {
  out.write("ISOW", 4);
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(net.layers().size()));
  for (const auto& layer : net.layers()) {
    put_u32(out, static_cast<std::uint32_t>(layer.weight.cols()));
    put_u32(out, static_cast<std::uint32_t>(layer.weight.rows()));
    put_f32(out, layer.omega);
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) put_f32(out, layer.weight(r, c));
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) put_f32(out, layer.bias(r));
  }
}

void write_weights(const std::string& path, const SirenNetwork& net) {
  auto f = open_out(path, true);
  write_weights(f, net);
  check_written(f, path);
}

SirenNetwork read_weights(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "ISOW", 4) != 0) throw IoError("not an ISOW weights file");
  if (get_u32(in) != 1) throw IoError("unsupported weights version");
  const std::uint32_t count = get_u32(in);
  if (count == 0 || count > 1024) throw IoError("bad layer count");
  std::vector<DenseLayer> layers(count);
  for (auto& layer : layers) {
    const std::uint32_t in_dim = get_u32(in);
    const std::uint32_t out_dim = get_u32(in);
    if (in_dim == 0 || out_dim == 0 || in_dim > (1u << 16) || out_dim > (1u << 16)) throw IoError("bad layer shape");
    layer.omega = get_f32(in);
    layer.weight.resize(out_dim, in_dim);
    layer.bias.resize(out_dim);
    for (std::uint32_t r = 0; r < out_dim; ++r)
      for (std::uint32_t c = 0; c < in_dim; ++c) layer.weight(r, c) = get_f32(in);
    for (std::uint32_t r = 0; r < out_dim; ++r) layer.bias(r) = get_f32(in);
  }
  try {
    return SirenNetwork(std::move(layers));
  } catch (const PreconditionError& e) {
    throw IoError(std::string("inconsistent weights: ") + e.what());
  }
}

SirenNetwork read_weights(const std::string& path) {
  auto f = open_in(path, true);
  return read_weights(f);
}

void write_log_csv(std::ostream& out, const std::vector<LogEntry>& log) {
  out << "iter,L_onSDF,L_normal,L_offSDF,L_eikonal,L_isoSDF,L_isoNormal,wall_seconds\n";
  for (const auto& e : log) {
    out << e.iter << ',' << format_real(e.on_sdf) << ',' << format_real(e.normal) << ',' << format_real(e.off_sdf)
        << ',' << format_real(e.eikonal) << ',' << (e.iso_sdf ? format_real(*e.iso_sdf) : "") << ','
        << (e.iso_normal ? format_real(*e.iso_normal) : "") << ',' << format_real(e.wall_seconds) << '\n';
  }
}

void write_log_csv(const std::string& path, const std::vector<LogEntry>& log) {
  auto f = open_out(path);
  write_log_csv(f, log);
  check_written(f, path);
}

}  // namespace iso
