#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "flowservo/bench.hpp"
#include "flowservo/error.hpp"

namespace flowservo {

namespace {

void put_u32_le(std::ofstream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

std::uint32_t get_u32_le(std::ifstream& in) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32_le(std::ofstream& out, float f) { put_u32_le(out, std::bit_cast<std::uint32_t>(f)); }
float get_f32_le(std::ifstream& in) { return std::bit_cast<float>(get_u32_le(in)); }

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

TrajectoryMetrics compute_metrics(std::span<const Eigen::Vector3d> positions, const Scene& scene) {
  TrajectoryMetrics m;
  m.min_dist = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < positions.size(); ++k) {
    m.min_dist = std::min(m.min_dist, scene.distance_to_nearest(positions[k]));
    if (k > 0) m.traj_length += (positions[k] - positions[k - 1]).norm();
  }
  return m;
}

std::vector<Eigen::Vector3d> trajectory_positions(const EpisodeResult& result) {
  std::vector<Eigen::Vector3d> out;
  out.reserve(result.trajectory.size());
  for (const auto& s : result.trajectory) out.push_back(s.pose.position);
  return out;
}

void write_trajectory_csv(const EpisodeResult& result, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << kTrajectoryCsvHeader << '\n';
  for (const auto& s : result.trajectory) {
    const auto& p = s.pose.position;
    const auto& c = s.command;
    out << fixed6(s.t) << ',' << fixed6(p.x()) << ',' << fixed6(p.y()) << ',' << fixed6(p.z()) << ','
        << fixed6(s.pose.yaw) << ',' << fixed6(c.v_fwd) << ',' << fixed6(c.v_left) << ',' << fixed6(c.v_up) << ','
        << fixed6(c.yaw_rate) << ',' << to_string(s.mode) << ',' << fixed6(s.mask_coverage) << ','
        << fixed6(s.center_coverage) << ',' << fixed6(s.loss) << ',' << fixed6(s.min_dist) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<CsvRow> read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != kTrajectoryCsvHeader) throw IoError(path.string() + ": unexpected CSV header");
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 14) throw IoError(path.string() + ": malformed row '" + line + "'");
    auto num = [&](int k) { return std::strtod(cells[static_cast<std::size_t>(k)].c_str(), nullptr); };
    rows.push_back({num(0), num(1), num(2), num(3), num(4), num(5), num(6), num(7), num(8), cells[9], num(10),
                    num(11), num(12), num(13)});
  }
  return rows;
}

void write_flo(const FlowField& flow, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  put_f32_le(out, kFloMagic);
  put_u32_le(out, static_cast<std::uint32_t>(flow.cols()));
  put_u32_le(out, static_cast<std::uint32_t>(flow.rows()));
  for (const auto& f : flow) {
    put_f32_le(out, static_cast<float>(f.col));
    put_f32_le(out, static_cast<float>(f.row));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

FlowField read_flo(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  if (get_f32_le(in) != kFloMagic) throw IoError(path.string() + ": bad .flo magic");
  const auto w = static_cast<std::int32_t>(get_u32_le(in));
  const auto h = static_cast<std::int32_t>(get_u32_le(in));
  if (!in || w < 0 || h < 0) throw IoError(path.string() + ": bad .flo header");
  FlowField flow(h, w);
  for (auto& f : flow) {
    f.col = get_f32_le(in);
    f.row = get_f32_le(in);
  }
  if (!in) throw IoError(path.string() + ": truncated .flo payload");
  return flow;
}

}  // namespace flowservo
