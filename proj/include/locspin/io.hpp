#pragma once

// Text checkpoints (hexfloat, bit-exact), CSV tables, SVG plots, run
// manifests and the output directory lock.

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "locspin/analysis.hpp"
#include "locspin/uniform_mps.hpp"
#include "locspin/window.hpp"

namespace locspin::io {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int checkpoint_version = 1;
inline constexpr int csv_schema = 1;

inline std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

inline double parse_hex(const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE) throw IoError("checkpoint: bad number '" + s + "'");
  return v;
}

namespace detail {

inline void write_matrix(std::ostream& os, const std::string& name, const Matrix& m) {
  os << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) os << ' ';
      os << hex(m(i, j).real()) << ' ' << hex(m(i, j).imag());
    }
    os << '\n';
  }
}

inline void write_tensor(std::ostream& os, const std::string& name, const MpsTensor& t) {
  os << "tensor " << name << ' ' << phys_dim(t) << ' ' << left_dim(t) << ' ' << right_dim(t) << '\n';
  for (int s = 0; s < phys_dim(t); ++s) write_matrix(os, name + "[" + std::to_string(s) + "]", t[s]);
}

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}

  std::string word() {
    std::string w;
    if (!(is_ >> w)) throw IoError("checkpoint: unexpected end of file");
    return w;
  }

  void expect(const std::string& w) {
    const std::string got = word();
    if (got != w) throw IoError("checkpoint: expected '" + w + "', got '" + got + "'");
  }

  long integer() {
    const std::string w = word();
    char* end = nullptr;
    const long v = std::strtol(w.c_str(), &end, 10);
    if (*end != '\0') throw IoError("checkpoint: bad integer '" + w + "'");
    return v;
  }

  double real() { return parse_hex(word()); }

  Matrix matrix() {
    expect("matrix");
    word();
    const long r = integer(), c = integer();
    if (r < 0 || c < 0) throw IoError("checkpoint: negative shape");
    Matrix m(r, c);
    for (long i = 0; i < r; ++i)
      for (long j = 0; j < c; ++j) {
        const double re = real();
        m(i, j) = cplx(re, real());
      }
    return m;
  }

  MpsTensor tensor() {
    expect("tensor");
    word();
    const long d = integer(), dl = integer(), dr = integer();
    MpsTensor t;
    for (long s = 0; s < d; ++s) {
      t.push_back(matrix());
      if (t.back().rows() != dl || t.back().cols() != dr) throw IoError("checkpoint: tensor shape mismatch");
    }
    return t;
  }

 private:
  std::istream& is_;
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << content;
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace detail

using Params = std::map<std::string, double>;

inline std::string serialize_uniform(const UniformMps& u, const Params& params = {}) {
  std::ostringstream os;
  os << "locspin-checkpoint " << checkpoint_version << "\nkind uniform\n";
  os << "d " << u.d() << "\nD " << u.bond() << '\n';
  os << "energy_density " << hex(u.energy_density) << "\ngradient " << hex(u.gradient) << '\n';
  os << "params " << params.size() << '\n';
  for (const auto& [k, v] : params) os << k << ' ' << hex(v) << '\n';
  detail::write_tensor(os, "al", u.al);
  detail::write_tensor(os, "ar", u.ar);
  detail::write_tensor(os, "ac", u.ac);
  detail::write_matrix(os, "c", u.c);
  return os.str();
}

struct UniformCheckpoint {
  UniformMps state;
  Params params;
};

inline UniformCheckpoint deserialize_uniform(std::istream& is) {
  detail::Reader r(is);
  r.expect("locspin-checkpoint");
  if (r.integer() != checkpoint_version) throw IoError("checkpoint: unsupported version");
  r.expect("kind");
  r.expect("uniform");
  r.expect("d");
  const long d = r.integer();
  r.expect("D");
  const long dim = r.integer();
  UniformCheckpoint out;
  UniformMps& u = out.state;
  r.expect("energy_density");
  u.energy_density = r.real();
  r.expect("gradient");
  u.gradient = r.real();
  r.expect("params");
  const long np = r.integer();
  for (long i = 0; i < np; ++i) {
    const std::string k = r.word();
    out.params[k] = r.real();
  }
  u.al = r.tensor();
  u.ar = r.tensor();
  u.ac = r.tensor();
  u.c = r.matrix();
  if (u.d() != d || u.bond() != dim || left_dim(u.ar) != dim || u.c.rows() != dim)
    throw IoError("checkpoint: header does not match tensors");
  return out;
}

inline void save_uniform(const std::filesystem::path& path, const UniformMps& u, const Params& params = {}) {
  detail::write_file(path, serialize_uniform(u, params));
}

inline UniformCheckpoint load_uniform_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  return deserialize_uniform(is);
}

inline UniformMps load_uniform(const std::filesystem::path& path) { return load_uniform_checkpoint(path).state; }

/// Window checkpoint: path of the background checkpoint, offset, centre and
/// the window tensors.
inline std::string serialize_window(const WindowMps& w, const std::string& background_ref) {
  std::ostringstream os;
  os << "locspin-checkpoint " << checkpoint_version << "\nkind window\n";
  os << "background " << std::quoted(background_ref) << '\n';
  os << "offset " << w.offset << "\ncenter " << w.center << "\nsize " << w.size() << '\n';
  for (int k = 0; k < w.size(); ++k) detail::write_tensor(os, "w" + std::to_string(k), w.tensors[static_cast<std::size_t>(k)]);
  return os.str();
}

struct WindowCheckpoint {
  std::string background_ref;
  WindowMps window;
};

/// Reads a window checkpoint; the background is loaded from the recorded
/// reference, resolved relative to the checkpoint's directory.
inline WindowCheckpoint load_window(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  detail::Reader r(is);
  r.expect("locspin-checkpoint");
  if (r.integer() != checkpoint_version) throw IoError("checkpoint: unsupported version");
  r.expect("kind");
  r.expect("window");
  r.expect("background");
  WindowCheckpoint out;
  if (!(is >> std::quoted(out.background_ref))) throw IoError("checkpoint: bad background reference");
  r.expect("offset");
  out.window.offset = static_cast<int>(r.integer());
  r.expect("center");
  out.window.center = static_cast<int>(r.integer());
  r.expect("size");
  const long n = r.integer();
  for (long k = 0; k < n; ++k) out.window.tensors.push_back(r.tensor());
  std::filesystem::path bg = out.background_ref;
  if (bg.is_relative()) bg = path.parent_path() / bg;
  out.window.background = load_uniform(bg);
  check_window(out.window, nullptr);
  return out;
}

inline void save_window(const std::filesystem::path& path, const WindowMps& w, const std::string& background_ref) {
  detail::write_file(path, serialize_window(w, background_ref));
}

// ---------------------------------------------------------------------------
// Tables and plots

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::pair<std::string, std::string>> meta;

  void add_row(const std::vector<double>& v) {
    std::vector<std::string> r;
    for (double x : v) r.push_back(format_double(x));
    rows.push_back(std::move(r));
  }
};

inline std::string to_csv(const Table& t) {
  std::ostringstream os;
  os << "# schema=" << csv_schema << '\n';
  for (const auto& [k, v] : t.meta) os << "# " << k << '=' << v << '\n';
  for (std::size_t i = 0; i < t.header.size(); ++i) os << (i ? "," : "") << t.header[i];
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
    os << '\n';
  }
  return os.str();
}

inline Table sweep_table(const SweepResult& s) {
  Table t;
  t.header.push_back(s.x_name);
  for (const auto& c : s.columns) t.header.push_back(c);
  for (const auto& [k, v] : s.metadata) t.meta.emplace_back(k, v);
  if (s.has_fit) {
    t.meta.emplace_back("fit_column", s.fit_column);
    t.meta.emplace_back("fit_slope", format_double(s.fit.slope));
    t.meta.emplace_back("fit_intercept", format_double(s.fit.intercept));
    t.meta.emplace_back("fit_decay_length", format_double(s.fit.decay_length));
    t.meta.emplace_back("fit_r2", format_double(s.fit.r2));
    t.meta.emplace_back("fit_range", format_double(s.fit.x_first) + ":" + format_double(s.fit.x_last));
  }
  for (const auto& w : s.warnings) t.meta.emplace_back("warning", w);
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    std::vector<double> row{s.x[i]};
    for (const auto& col : s.values) row.push_back(col[i]);
    t.add_row(row);
  }
  return t;
}

/// Log-linear plot of |y| against x with the fitted line overlaid.
inline std::string sweep_svg(const SweepResult& s, const std::string& title) {
  const double w = 640, h = 420, ml = 70, mr = 20, mt = 40, mb = 50;
  const std::vector<double>& y = s.column(s.fit_column);
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < s.x.size(); ++i)
    if (std::abs(y[i]) > 0 && std::isfinite(y[i])) pts.emplace_back(s.x[i], std::log10(std::abs(y[i])));
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" << title
     << "</text>\n";
  if (pts.empty()) {
    os << "</svg>\n";
    return os.str();
  }
  double x0 = pts.front().first, x1 = x0, y0 = pts.front().second, y1 = y0;
  for (const auto& [px, py] : pts) {
    x0 = std::min(x0, px);
    x1 = std::max(x1, px);
    y0 = std::min(y0, py);
    y1 = std::max(y1, py);
  }
  if (x1 == x0) x1 = x0 + 1;
  y0 = std::floor(y0);
  y1 = std::ceil(y1);
  if (y1 == y0) y1 = y0 + 1;
  const auto sx = [&](double v) { return ml + (v - x0) / (x1 - x0) * (w - ml - mr); };
  const auto sy = [&](double v) { return h - mb - (v - y0) / (y1 - y0) * (h - mt - mb); };
  char buf[256];
  os << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\"" << h - mb
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << h - mb << "\" stroke=\"black\"/>\n";
  for (int e = static_cast<int>(y0); e <= static_cast<int>(y1); ++e) {
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">1e%d</text>\n", ml - 6, sy(e) + 4, e);
    os << buf;
  }
  for (const auto& [px, py] : pts) {
    std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3.5\" fill=\"#1f5fa8\"/>\n", sx(px), sy(py));
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%s</text>\n", (ml + w - mr) / 2,
                h - 12, s.x_name.c_str());
  os << buf;
  std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%s</text>\n", w - mr, h - mb - 6,
                s.fit_column.c_str());
  os << buf;
  if (s.has_fit) {
    const double l10 = std::log(10.0);
    const double fa = (s.fit.intercept + s.fit.slope * x0) / l10, fb = (s.fit.intercept + s.fit.slope * x1) / l10;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"#c0392b\" stroke-dasharray=\"6,4\"/>\n",
                  sx(x0), sy(fa), sx(x1), sy(fb));
    os << buf;
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" fill=\"#c0392b\">decay length %.4g (R2 %.4f)</text>\n",
                  ml + 10, mt + 14, s.fit.decay_length, s.fit.r2);
    os << buf;
  }
  os << "</g>\n</svg>\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Output directory

/// Output root: $LOCSPIN_OUTPUT_ROOT when set, otherwise the fallback.
inline std::filesystem::path output_root(const std::filesystem::path& fallback) {
  if (const char* env = std::getenv("LOCSPIN_OUTPUT_ROOT"); env && *env) return env;
  return fallback;
}

/// Exclusive lock on an output directory, held for the object's lifetime.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir) : path_(dir / ".locspin.lock") {
    std::filesystem::create_directories(dir);
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) throw IoError("output directory is locked by another run: " + path_.string());
    const std::string pid = std::to_string(::getpid()) + "\n";
    if (::write(fd_, pid.data(), pid.size()) < 0) {
      ::close(fd_);
      std::filesystem::remove(path_);
      throw IoError("cannot write lock file " + path_.string());
    }
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;
  ~DirectoryLock() {
    ::close(fd_);
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }

 private:
  std::filesystem::path path_;
  int fd_ = -1;
};

/// Collects the files a run writes so the manifest can list all of them.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const std::filesystem::path& dir() const { return dir_; }

  std::filesystem::path write(const std::string& name, const std::string& content) {
    detail::write_file(dir_ / name, content);
    files_.push_back(name);
    return dir_ / name;
  }

  void record(const std::string& name) { files_.push_back(name); }
  const std::vector<std::string>& files() const { return files_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> files_;
};

}  // namespace locspin::io
