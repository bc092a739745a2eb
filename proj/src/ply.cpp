#include "pointcont/ply.hpp"

#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace pct {

Rgb cluster_color(std::size_t id) {
  // Multiplication by an odd constant permutes Z / 2^24, so the map is a
  // bijection on 24-bit ids while scattering neighbors across the cube.
  const std::uint32_t h = static_cast<std::uint32_t>((id * 0x9E3779ULL + 0x5A5A5AULL) & 0xFFFFFFu);
  return {static_cast<std::uint8_t>(h >> 16), static_cast<std::uint8_t>(h >> 8),
          static_cast<std::uint8_t>(h)};
}

void write_cluster_ply(std::ostream& out, const PointCloud& cloud,
                       std::span<const std::size_t> labels) {
  if (labels.size() != cloud.size())
    throw std::invalid_argument("ply: one label per point required");
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
      << "\nproperty float x\nproperty float y\nproperty float z\n"
         "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  out << std::setprecision(9);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Rgb c = cluster_color(labels[i]);
    out << static_cast<float>(cloud[i][0]) << ' ' << static_cast<float>(cloud[i][1]) << ' '
        << static_cast<float>(cloud[i][2]) << ' ' << int(c[0]) << ' ' << int(c[1]) << ' '
        << int(c[2]) << '\n';
  }
}

void write_cluster_csv(std::ostream& out, std::size_t stage, std::size_t head,
                       std::span<const std::size_t> labels, bool header) {
  if (header) out << "stage,head,point_index,cluster_id\n";
  for (std::size_t i = 0; i < labels.size(); ++i)
    out << stage << ',' << head << ',' << i << ',' << labels[i] << '\n';
}

}  // namespace pct
