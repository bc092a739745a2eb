#include "pointcont/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "pointcont/checkpoint.hpp"
#include "pointcont/errors.hpp"
#include "pointcont/param_store.hpp"

namespace pct {

namespace {

std::vector<std::string> tokens_of(const std::string& line) {
  std::string body = line.substr(0, line.find('#'));
  std::istringstream ss(body);
  std::vector<std::string> out;
  for (std::string t; ss >> t;) out.push_back(t);
  return out;
}

template <typename T>
bool parse_token(const std::string& t, T& out) {
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  return ec == std::errc() && p == t.data() + t.size();
}

Rng sample_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(c)};
  return Rng(seq);
}

Point3 surface_point(ToyShape shape, Rng& rng, const ToyOptions& opts) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  switch (shape) {
    case ToyShape::sphere: {
      std::normal_distribution<double> g(0.0, 1.0);
      for (;;) {
        Point3 p{g(rng), g(rng), g(rng)};
        const double r = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
        if (r > 1e-12) return {p[0] / r, p[1] / r, p[2] / r};
      }
    }
    case ToyShape::cube: {
      const int face = std::uniform_int_distribution<int>(0, 5)(rng);
      Point3 p{u(rng), u(rng), u(rng)};
      p[static_cast<std::size_t>(face / 2)] = face % 2 == 0 ? 1.0 : -1.0;
      return p;
    }
    case ToyShape::torus: {
      std::uniform_real_distribution<double> ang(0.0, 2.0 * std::numbers::pi);
      const double a = ang(rng), b = ang(rng);
      const double ring = 1.0 + opts.torus_minor * std::cos(b);
      return {ring * std::cos(a), ring * std::sin(a), opts.torus_minor * std::sin(b)};
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace

std::vector<Point3> parse_off(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto next = [&](std::vector<std::string>& toks) {
    while (std::getline(in, line)) {
      ++lineno;
      toks = tokens_of(line);
      if (!toks.empty()) return true;
    }
    return false;
  };

  std::vector<std::string> toks;
  if (!next(toks)) throw ParseError(lineno == 0 ? 1 : lineno, "empty file, expected OFF header");
  if (toks[0] != "OFF") throw ParseError(lineno, "expected OFF magic, got `" + toks[0] + "`");
  toks.erase(toks.begin());
  if (toks.empty() && !next(toks)) throw ParseError(lineno, "missing counts line");
  if (toks.size() != 3) throw ParseError(lineno, "counts line needs vertex, face, edge counts");
  std::size_t counts[3];
  for (std::size_t i = 0; i < 3; ++i)
    if (!parse_token(toks[i], counts[i]))
      throw ParseError(lineno, "bad count `" + toks[i] + "`");
  if (counts[0] == 0) throw ParseError(lineno, "no vertices");

  std::vector<Point3> verts;
  verts.reserve(counts[0]);
  while (verts.size() < counts[0]) {
    if (!next(toks))
      throw ParseError(lineno, "vertex count mismatch: header declares " +
                                   std::to_string(counts[0]) + ", file has " +
                                   std::to_string(verts.size()));
    if (toks.size() < 3) throw ParseError(lineno, "vertex needs 3 coordinates");
    Point3 p{};
    for (std::size_t c = 0; c < 3; ++c)
      if (!parse_token(toks[c], p[c]) || !std::isfinite(p[c]))
        throw ParseError(lineno, "bad coordinate `" + toks[c] + "`");
    verts.push_back(p);
  }
  // Without faces nothing may follow the vertex block.
  if (counts[1] == 0 && next(toks))
    throw ParseError(lineno, "vertex count mismatch: more vertex lines than the header declares");
  return verts;
}

std::vector<Point3> load_off(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open " + path.string());
  return parse_off(in);
}

PointCloud normalize_unit_sphere(PointCloud cloud) {
  if (cloud.size() == 0) throw std::invalid_argument("normalize: empty cloud");
  const Point3 c = centroid(cloud);
  double max_sq = 0.0;
  for (auto& p : cloud.points) {
    for (std::size_t i = 0; i < 3; ++i) p[i] -= c[i];
    max_sq = std::max(max_sq, p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
  }
  if (max_sq > 0.0) {
    const double s = 1.0 / std::sqrt(max_sq);
    for (auto& p : cloud.points)
      for (double& v : p) v *= s;
  }
  return cloud;
}

PointCloud sample_n(const PointCloud& cloud, std::size_t n, std::uint64_t seed) {
  if (cloud.size() == 0) throw std::invalid_argument("sample_n: empty cloud");
  if (n == 0) throw std::invalid_argument("sample_n: n must be >= 1");
  Rng rng(seed);
  PointCloud out;
  out.points.reserve(n);
  if (cloud.size() >= n) {
    std::vector<std::size_t> idx(cloud.size());
    std::iota(idx.begin(), idx.end(), 0);
    // Partial Fisher-Yates.
    for (std::size_t i = 0; i < n; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
      out.points.push_back(cloud[idx[i]]);
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, cloud.size() - 1);
    for (std::size_t i = 0; i < n; ++i) out.points.push_back(cloud[pick(rng)]);
  }
  return out;
}

AugmentParams draw_augment(std::uint64_t seed, const AugmentOptions& opts) {
  Rng rng(seed);
  std::uniform_real_distribution<double> s(opts.scale_min, opts.scale_max);
  std::uniform_real_distribution<double> t(-opts.translate, opts.translate);
  AugmentParams p;
  for (double& v : p.scale) v = opts.scale_min == opts.scale_max ? opts.scale_min : s(rng);
  for (double& v : p.shift) v = opts.translate == 0.0 ? 0.0 : t(rng);
  return p;
}

PointCloud apply_augment(PointCloud cloud, const AugmentParams& p) {
  for (auto& q : cloud.points)
    for (std::size_t i = 0; i < 3; ++i) q[i] = q[i] * p.scale[i] + p.shift[i];
  return cloud;
}

PointCloud augment(const PointCloud& cloud, std::uint64_t seed, const AugmentOptions& opts) {
  return apply_augment(cloud, draw_augment(seed, opts));
}

ToyShape parse_toy_shape(const std::string& name) {
  if (name == "sphere") return ToyShape::sphere;
  if (name == "cube") return ToyShape::cube;
  if (name == "torus") return ToyShape::torus;
  throw std::invalid_argument("unknown toy class `" + name + "`");
}

const char* to_string(ToyShape s) {
  switch (s) {
    case ToyShape::sphere: return "sphere";
    case ToyShape::cube: return "cube";
    case ToyShape::torus: return "torus";
  }
  return "?";
}

PointCloud synth_shape(ToyShape shape, std::size_t n_points, std::uint64_t seed,
                       const ToyOptions& opts) {
  if (n_points == 0) throw std::invalid_argument("synth_shape: n_points must be >= 1");
  Rng rng(seed);
  PointCloud cloud;
  cloud.points.reserve(n_points);
  while (cloud.size() + 2 <= n_points) {
    const Point3 p = surface_point(shape, rng, opts);
    cloud.points.push_back(p);
    cloud.points.push_back({-p[0], -p[1], -p[2]});
  }
  if (cloud.size() < n_points) cloud.points.push_back(surface_point(shape, rng, opts));

  if (opts.noise_sigma > 0.0) {
    std::normal_distribution<double> g(0.0, opts.noise_sigma);
    for (auto& p : cloud.points)
      for (double& v : p) v += g(rng);
  }
  if (opts.rotate) {
    const double a = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
    const double c = std::cos(a), s = std::sin(a);
    for (auto& p : cloud.points) {
      const double x = p[0], y = p[1];
      p[0] = c * x - s * y;
      p[1] = s * x + c * y;
    }
  }
  return normalize_unit_sphere(std::move(cloud));
}

Dataset synth_toy(const std::vector<std::string>& classes, std::size_t per_class,
                  std::size_t n_points, std::uint64_t seed, std::uint64_t split,
                  const ToyOptions& opts) {
  if (per_class == 0) throw std::invalid_argument("synth_toy: per_class must be >= 1");
  if (classes.empty()) throw std::invalid_argument("synth_toy: no classes");
  std::vector<ToyShape> shapes;
  for (const auto& c : classes) shapes.push_back(parse_toy_shape(c));

  Dataset data;
  data.class_names = classes;
  const std::size_t total = classes.size() * per_class;
  data.clouds.resize(total);
  data.labels.resize(total);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(total); ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const std::size_t label = idx / per_class;
    Rng seeder = sample_rng(seed, split, label, idx % per_class);
    data.clouds[idx] = synth_shape(shapes[label], n_points, seeder(), opts);
    data.labels[idx] = label;
  }
  return data;
}

void save_split(const std::filesystem::path& path, const Dataset& data) {
  if (data.size() == 0) throw std::invalid_argument("save_split: empty dataset");
  const std::size_t n = data.clouds.front().size();
  NamedTensor pts{"points", {static_cast<std::uint32_t>(data.size()),
                             static_cast<std::uint32_t>(n), 3}, {}};
  pts.data.reserve(data.size() * n * 3);
  for (const auto& c : data.clouds) {
    if (c.size() != n) throw std::invalid_argument("save_split: clouds differ in size");
    for (const auto& p : c.points)
      for (double v : p) pts.data.push_back(static_cast<float>(v));
  }
  NamedTensor lab{"labels", {static_cast<std::uint32_t>(data.size())}, {}};
  for (std::size_t l : data.labels) lab.data.push_back(static_cast<float>(l));
  write_pcnt_file(path, {lab, pts});
}

Dataset load_split(const std::filesystem::path& path, std::vector<std::string> class_names) {
  const auto tensors = read_pcnt_file(path);
  const NamedTensor* pts = nullptr;
  const NamedTensor* lab = nullptr;
  for (const auto& t : tensors) {
    if (t.name == "points") pts = &t;
    if (t.name == "labels") lab = &t;
  }
  if (!pts || !lab) throw FormatError(path.string() + ": need `points` and `labels` tensors");
  if (pts->dims.size() != 3 || pts->dims[2] != 3 || lab->dims.size() != 1 ||
      lab->dims[0] != pts->dims[0])
    throw FormatError(path.string() + ": expected points [count, n, 3] and labels [count]");
  Dataset data;
  data.class_names = std::move(class_names);
  const std::size_t count = pts->dims[0], n = pts->dims[1];
  data.clouds.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    data.clouds[i].points.resize(n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t c = 0; c < 3; ++c)
        data.clouds[i].points[j][c] = pts->data[(i * n + j) * 3 + c];
    const float l = lab->data[i];
    if (!(l >= 0.0f) || l != std::floor(l) ||
        (!data.class_names.empty() && static_cast<std::size_t>(l) >= data.class_names.size()))
      throw FormatError(path.string() + ": bad label at sample " + std::to_string(i));
    data.labels.push_back(static_cast<std::size_t>(l));
  }
  return data;
}

void save_dataset(const std::filesystem::path& dir, const DatasetPair& data) {
  std::filesystem::create_directories(dir);
  save_split(dir / "train.pcnt", data.train);
  save_split(dir / "test.pcnt", data.test);
  std::ofstream names(dir / "classes.txt", std::ios::trunc);
  for (const auto& n : data.train.class_names) names << n << '\n';
  if (!names) throw std::ios_base::failure("cannot write " + (dir / "classes.txt").string());
}

DatasetPair load_dataset(const std::filesystem::path& dir) {
  std::ifstream names_in(dir / "classes.txt");
  if (!names_in) throw std::ios_base::failure("cannot open " + (dir / "classes.txt").string());
  std::vector<std::string> names;
  for (std::string line; std::getline(names_in, line);)
    if (!line.empty()) names.push_back(line);
  return {load_split(dir / "train.pcnt", names), load_split(dir / "test.pcnt", names)};
}

}  // namespace pct
