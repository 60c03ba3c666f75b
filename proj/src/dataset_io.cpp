#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "distlift/datagen.hpp"
#include "distlift/errors.hpp"

namespace distlift::datagen {

namespace {

constexpr const char* kMagic = "distlift-dataset";
constexpr const char* kVersion = "v1";

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Line-oriented reader that tracks position for parse errors.
class LineReader {
 public:
  LineReader(std::istream& in, std::string path)
      : in_(in), path_(std::move(path)) {}

  // Returns false at EOF; skips blank lines.
  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++lineno_;
      if (!line.empty()) return true;
    }
    return false;
  }

  std::string require(const std::string& what) {
    std::string line;
    if (!next(line)) fail("unexpected end of file, expected " + what);
    return line;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(path_ + ":" + std::to_string(lineno_) + ": " + msg);
  }

 private:
  std::istream& in_;
  std::string path_;
  int lineno_ = 0;
};

// Splits a line into the keyword and the remaining fields.
std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

double parse_double(LineReader& r, const std::string& tok) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(tok, &pos);
    if (pos != tok.size()) r.fail("trailing characters in number '" + tok + "'");
    return v;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception&) {
    r.fail("not a number: '" + tok + "'");
  }
}

long parse_int(LineReader& r, const std::string& tok) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(tok, &pos);
    if (pos != tok.size()) r.fail("trailing characters in integer '" + tok + "'");
    return v;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception&) {
    r.fail("not an integer: '" + tok + "'");
  }
}

void write_trajectory(std::ostream& out, const Trajectory2D& t) {
  out << "frames " << t.frames << " joints " << t.joints << "\n";
  for (int f = 0; f < t.frames; ++f) {
    for (int j = 0; j < t.joints; ++j) {
      const auto& p = t.at(f, j);
      out << "p " << fmt_double(p.x) << ' ' << fmt_double(p.y) << "\n";
    }
  }
}

Trajectory2D read_trajectory(LineReader& r) {
  auto head = fields(r.require("trajectory header"));
  if (head.size() != 4 || head[0] != "frames" || head[2] != "joints")
    r.fail("expected 'frames <T> joints <J>'");
  Trajectory2D t;
  t.frames = static_cast<int>(parse_int(r, head[1]));
  t.joints = static_cast<int>(parse_int(r, head[3]));
  if (t.frames < 0 || t.joints < 0) r.fail("negative trajectory shape");
  t.points.resize(static_cast<std::size_t>(t.frames) * t.joints);
  for (auto& p : t.points) {
    auto f = fields(r.require("point line"));
    if (f.size() != 3 || f[0] != "p") r.fail("expected 'p <x> <y>'");
    p.x = parse_double(r, f[1]);
    p.y = parse_double(r, f[2]);
  }
  return t;
}

}  // namespace

void save_dataset(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);

  out << kMagic << ' ' << kVersion << "\n";
  out << "records " << data.size() << "\n";

  if (!data.empty()) {
    const auto& topo = data.front().motion.topology;
    topo.validate();
    out << "topology joints " << topo.joint_count() << "\n";
    for (int j = 0; j < topo.joint_count(); ++j)
      out << "joint " << topo.joint_names[j] << ' ' << topo.parent[j] << "\n";
    out << "mirror_pairs " << topo.mirror_pairs.size() << "\n";
    for (const auto& [l, rr] : topo.mirror_pairs)
      out << "pair " << l << ' ' << rr << "\n";
    out << "head_segment " << topo.neck_joint << ' ' << topo.head_top_joint
        << "\n";
  }

  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& rec = data[i];
    const auto& m = rec.motion;
    out << "record " << i << "\n";
    out << "seed " << m.seed << "\n";
    out << "fps " << fmt_double(m.fps) << "\n";
    const auto& K = m.intrinsics;
    out << "intrinsics " << fmt_double(K.fx) << ' ' << fmt_double(K.fy) << ' '
        << fmt_double(K.cx) << ' ' << fmt_double(K.cy) << ' ' << K.width << ' '
        << K.height << "\n";
    out << "gt3d frames " << m.gt3d.frame_count() << " joints "
        << m.gt3d.joint_count() << "\n";
    for (const auto& frame : m.gt3d.frames) {
      for (const auto& j : frame.joints)
        out << "j " << fmt_double(j.x) << ' ' << fmt_double(j.y) << ' '
            << fmt_double(j.z) << "\n";
    }
    out << "tracks " << rec.tracks.size() << "\n";
    for (const auto& [name, traj] : rec.tracks) {
      out << "track " << name << "\n";
      write_trajectory(out, traj);
    }
  }
  out << "end\n";
  if (!out) throw IoError("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  LineReader r(in, path);

  auto head = fields(r.require("header"));
  if (head.size() != 2 || head[0] != kMagic)
    r.fail("not a dataset file (missing '" + std::string(kMagic) + "' header)");
  if (head[1] != kVersion)
    r.fail("unsupported version '" + head[1] + "' (supported: " + kVersion + ")");

  auto rec_line = fields(r.require("record count"));
  if (rec_line.size() != 2 || rec_line[0] != "records")
    r.fail("expected 'records <n>'");
  const long n_records = parse_int(r, rec_line[1]);
  if (n_records < 0) r.fail("negative record count");

  skeleton::SkeletonTopology topo;
  if (n_records > 0) {
    auto tline = fields(r.require("topology"));
    if (tline.size() != 3 || tline[0] != "topology" || tline[1] != "joints")
      r.fail("expected 'topology joints <J>'");
    const long J = parse_int(r, tline[2]);
    for (long j = 0; j < J; ++j) {
      auto f = fields(r.require("joint line"));
      if (f.size() != 3 || f[0] != "joint") r.fail("expected 'joint <name> <parent>'");
      topo.joint_names.push_back(f[1]);
      topo.parent.push_back(static_cast<int>(parse_int(r, f[2])));
    }
    for (long j = 0; j < J; ++j)
      if (topo.parent[j] >= 0)
        topo.bones.emplace_back(static_cast<int>(j), topo.parent[j]);
    auto mp = fields(r.require("mirror pairs"));
    if (mp.size() != 2 || mp[0] != "mirror_pairs")
      r.fail("expected 'mirror_pairs <n>'");
    const long n_pairs = parse_int(r, mp[1]);
    for (long p = 0; p < n_pairs; ++p) {
      auto f = fields(r.require("pair line"));
      if (f.size() != 3 || f[0] != "pair") r.fail("expected 'pair <l> <r>'");
      topo.mirror_pairs.emplace_back(static_cast<int>(parse_int(r, f[1])),
                                     static_cast<int>(parse_int(r, f[2])));
    }
    auto hs = fields(r.require("head segment"));
    if (hs.size() != 3 || hs[0] != "head_segment")
      r.fail("expected 'head_segment <neck> <head_top>'");
    topo.neck_joint = static_cast<int>(parse_int(r, hs[1]));
    topo.head_top_joint = static_cast<int>(parse_int(r, hs[2]));
    try {
      topo.validate();
    } catch (const InvalidInputError& e) {
      r.fail(std::string("topology invariant violated: ") + e.what());
    }
  }

  Dataset data;
  for (long i = 0; i < n_records; ++i) {
    auto rl = fields(r.require("record"));
    if (rl.size() != 2 || rl[0] != "record") r.fail("expected 'record <i>'");

    DatasetRecord rec;
    rec.motion.topology = topo;

    auto sl = fields(r.require("seed"));
    if (sl.size() != 2 || sl[0] != "seed") r.fail("expected 'seed <u64>'");
    rec.motion.seed = std::strtoull(sl[1].c_str(), nullptr, 10);

    auto fl = fields(r.require("fps"));
    if (fl.size() != 2 || fl[0] != "fps") r.fail("expected 'fps <v>'");
    rec.motion.fps = parse_double(r, fl[1]);

    auto il = fields(r.require("intrinsics"));
    if (il.size() != 7 || il[0] != "intrinsics")
      r.fail("expected 'intrinsics <fx> <fy> <cx> <cy> <w> <h>'");
    auto& K = rec.motion.intrinsics;
    K.fx = parse_double(r, il[1]);
    K.fy = parse_double(r, il[2]);
    K.cx = parse_double(r, il[3]);
    K.cy = parse_double(r, il[4]);
    K.width = static_cast<int>(parse_int(r, il[5]));
    K.height = static_cast<int>(parse_int(r, il[6]));

    auto gl = fields(r.require("gt3d header"));
    if (gl.size() != 5 || gl[0] != "gt3d" || gl[1] != "frames" || gl[3] != "joints")
      r.fail("expected 'gt3d frames <T> joints <J>'");
    const long T = parse_int(r, gl[2]);
    const long J = parse_int(r, gl[4]);
    if (J != topo.joint_count()) r.fail("record joint count differs from topology");
    rec.motion.gt3d.frames.resize(T);
    for (long t = 0; t < T; ++t) {
      auto& frame = rec.motion.gt3d.frames[t];
      frame.joints.resize(J);
      for (long j = 0; j < J; ++j) {
        auto f = fields(r.require("joint coordinate line"));
        if (f.size() != 4 || f[0] != "j") r.fail("expected 'j <x> <y> <z>'");
        frame.joints[j] = {parse_double(r, f[1]), parse_double(r, f[2]),
                           parse_double(r, f[3])};
      }
    }

    auto tl = fields(r.require("tracks"));
    if (tl.size() != 2 || tl[0] != "tracks") r.fail("expected 'tracks <n>'");
    const long n_tracks = parse_int(r, tl[1]);
    for (long k = 0; k < n_tracks; ++k) {
      auto nl = fields(r.require("track name"));
      if (nl.size() != 2 || nl[0] != "track") r.fail("expected 'track <name>'");
      rec.tracks[nl[1]] = read_trajectory(r);
    }
    data.push_back(std::move(rec));
  }

  auto endl_ = fields(r.require("end marker"));
  if (endl_.size() != 1 || endl_[0] != "end") r.fail("expected 'end'");
  return data;
}

}  // namespace distlift::datagen
