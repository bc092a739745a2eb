#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>

#include "pointcont/geometry.hpp"

namespace pct {

using Rgb = std::array<std::uint8_t, 3>;

// Fixed color per cluster id; distinct ids below 2^24 get distinct colors.
Rgb cluster_color(std::size_t id);

// ASCII PLY with x y z red green blue per point, colored by labels[i].
void write_cluster_ply(std::ostream& out, const PointCloud& cloud,
                       std::span<const std::size_t> labels);

// Rows of stage,head,point_index,cluster_id.
void write_cluster_csv(std::ostream& out, std::size_t stage, std::size_t head,
                       std::span<const std::size_t> labels, bool header = true);

}  // namespace pct
