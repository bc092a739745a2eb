#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "pointcont/geometry.hpp"

namespace pct {

// OFF vertex list; faces are skipped. The counts may share the magic line
// ("OFF 8 6 0"). '#' comments and blank lines are ignored. Malformed input
// throws ParseError with the offending line.
std::vector<Point3> parse_off(std::istream& in);
std::vector<Point3> load_off(const std::filesystem::path& path);

// Centers on the centroid and divides by the largest norm. A cloud whose
// points all coincide is only centered.
PointCloud normalize_unit_sphere(PointCloud cloud);

// Exactly n points: without replacement (in shuffled order) when the input
// has at least n points, with replacement otherwise.
PointCloud sample_n(const PointCloud& cloud, std::size_t n, std::uint64_t seed);

struct AugmentOptions {
  double scale_min = 0.8;
  double scale_max = 1.2;
  double translate = 0.1;
};

struct AugmentParams {
  Point3 scale{1.0, 1.0, 1.0};
  Point3 shift{0.0, 0.0, 0.0};
};

// Per-axis scale in [scale_min, scale_max] and shift in [-translate, translate].
AugmentParams draw_augment(std::uint64_t seed, const AugmentOptions& opts = {});
PointCloud apply_augment(PointCloud cloud, const AugmentParams& p);
PointCloud augment(const PointCloud& cloud, std::uint64_t seed, const AugmentOptions& opts = {});

enum class ToyShape { sphere, cube, torus };

ToyShape parse_toy_shape(const std::string& name);  // std::invalid_argument if unknown
const char* to_string(ToyShape s);

struct ToyOptions {
  double noise_sigma = 0.01;
  bool rotate = true;  // random rotation about the vertical (z) axis
  double torus_minor = 0.4;  // tube radius relative to the ring radius 1
};

// One shape with noise_sigma jitter, optional rotation, then normalization.
// Points are drawn as antipodal pairs, so without noise the raw centroid is
// exactly zero.
PointCloud synth_shape(ToyShape shape, std::size_t n_points, std::uint64_t seed,
                       const ToyOptions& opts = {});

struct Dataset {
  std::vector<PointCloud> clouds;
  std::vector<std::size_t> labels;
  std::vector<std::string> class_names;

  std::size_t size() const noexcept { return clouds.size(); }
  std::size_t classes() const noexcept { return class_names.size(); }
};

// per_class clouds of every shape, labels in the order given. `split`
// selects an independent random stream, so train and test draws differ.
Dataset synth_toy(const std::vector<std::string>& classes, std::size_t per_class,
                  std::size_t n_points, std::uint64_t seed, std::uint64_t split = 0,
                  const ToyOptions& opts = {});

// PCNT file with "points" [count, n, 3] and "labels" [count].
void save_split(const std::filesystem::path& path, const Dataset& data);
Dataset load_split(const std::filesystem::path& path, std::vector<std::string> class_names);

struct DatasetPair {
  Dataset train;
  Dataset test;
};

// DIR/train.pcnt, DIR/test.pcnt, DIR/classes.txt (one name per line).
void save_dataset(const std::filesystem::path& dir, const DatasetPair& data);
DatasetPair load_dataset(const std::filesystem::path& dir);

}  // namespace pct
