#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "pointcont/data.hpp"
#include "pointcont/errors.hpp"

using namespace pct;

namespace {

std::size_t off_error_line(const std::string& text) {
  std::istringstream in(text);
  try {
    parse_off(in);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

double norm(const Point3& p) { return std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]); }

double max_norm(const PointCloud& c) {
  double m = 0;
  for (const auto& p : c.points) m = std::max(m, norm(p));
  return m;
}

Point3 mean(const PointCloud& c) {
  Point3 m{0, 0, 0};
  for (const auto& p : c.points)
    for (int i = 0; i < 3; ++i) m[i] += p[i] / double(c.size());
  return m;
}

}  // namespace

TEST_CASE("OFF parsing") {
  std::istringstream minimal("OFF\n1 0 0\n0 0 0\n");
  const auto one = parse_off(minimal);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == Point3{0, 0, 0});

  std::istringstream cube(
      "OFF\n# unit cube\n8 6 0\n"
      "0 0 0\n1 0 0\n1 1 0\n0 1 0\n0 0 1\n1 0 1\n1 1 1\n0 1 1\n"
      "4 0 1 2 3\n4 4 5 6 7\n4 0 1 5 4\n4 2 3 7 6\n4 0 3 7 4\n4 1 2 6 5\n");
  const auto v = parse_off(cube);
  REQUIRE(v.size() == 8);
  CHECK(v[2] == Point3{1, 1, 0});
  CHECK(v[7] == Point3{0, 1, 1});

  std::istringstream same_line("OFF 2 0 0\n\n1.5 -2 3e-1\n4 5 6\n");
  const auto s = parse_off(same_line);
  REQUIRE(s.size() == 2);
  CHECK(s[0][2] == doctest::Approx(0.3));

  CHECK(off_error_line("") == 1);
  CHECK(off_error_line("PLY\n1 0 0\n0 0 0\n") == 1);
  CHECK(off_error_line("OFF\n3 0 0\n0 0 0\n1 1 1\n") > 0);
  CHECK(off_error_line("OFF\n1 0 0\n0 0 0\n1 1 1\n") == 4);
  CHECK(off_error_line("OFF\n2 0 0\n0 0 0\n1 x 1\n") == 4);
  CHECK(off_error_line("OFF\nten 0 0\n") == 2);
  CHECK(off_error_line("OFF\n0 0 0\n") == 2);
  CHECK(off_error_line("OFF\n1 0\n0 0 0\n") == 2);
  CHECK_THROWS_AS(load_off("/nonexistent/file.off"), std::ios_base::failure);
}

TEST_CASE("normalization") {
  PointCloud c;
  c.points = {{0, 0, 0}, {2, 0, 0}};
  const auto n = normalize_unit_sphere(c);
  CHECK(n.points[0] == Point3{-1, 0, 0});
  CHECK(n.points[1] == Point3{1, 0, 0});

  const auto r = normalize_unit_sphere(testing::random_cloud(500, 3));
  for (double m : mean(r)) CHECK(std::abs(m) < 1e-12);
  CHECK(max_norm(r) == doctest::Approx(1.0).epsilon(1e-14));
  const auto again = normalize_unit_sphere(r);
  for (std::size_t i = 0; i < r.size(); ++i)
    for (int d = 0; d < 3; ++d) CHECK(std::abs(again[i][d] - r[i][d]) < 1e-12);

  PointCloud same;
  same.points.assign(5, {2, 3, 4});
  for (const auto& p : normalize_unit_sphere(same).points) CHECK(p == Point3{0, 0, 0});
}

TEST_CASE("sampling") {
  const auto c = testing::random_cloud(50, 1);
  auto perm = sample_n(c, 50, 7).points;
  auto orig = c.points;
  std::sort(perm.begin(), perm.end());
  std::sort(orig.begin(), orig.end());
  CHECK(perm == orig);

  const auto sub = sample_n(c, 20, 3);
  CHECK(sub.size() == 20);
  std::set<Point3> distinct(sub.points.begin(), sub.points.end());
  CHECK(distinct.size() == 20);
  CHECK(sample_n(c, 20, 3).points == sub.points);
  CHECK(sample_n(c, 20, 4).points != sub.points);

  const auto four = testing::random_cloud(4, 2);
  const auto up = sample_n(four, 8, 1);
  CHECK(up.size() == 8);
  for (const auto& p : up.points)
    CHECK(std::find(four.points.begin(), four.points.end(), p) != four.points.end());

  CHECK_THROWS_AS(sample_n(c, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(sample_n(PointCloud{}, 4, 1), std::invalid_argument);
}

TEST_CASE("augmentation") {
  const auto c = normalize_unit_sphere(testing::random_cloud(100, 5));
  CHECK(apply_augment(c, AugmentParams{}).points == c.points);
  CHECK(augment(c, 3).points == augment(c, 3).points);
  CHECK(augment(c, 3).points != augment(c, 4).points);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto p = draw_augment(s);
    for (int i = 0; i < 3; ++i) {
      CHECK(p.scale[i] >= 0.8);
      CHECK(p.scale[i] <= 1.2);
      CHECK(std::abs(p.shift[i]) <= 0.1);
    }
  }
  const auto p = draw_augment(11);
  const auto out = apply_augment(c, p);
  const Point3 before = mean(c), after = mean(out);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(after[i] - (p.scale[i] * before[i] + p.shift[i])) < 1e-12);
  const AugmentOptions flat{1.0, 1.0, 0.0};
  CHECK(augment(c, 9, flat).points == c.points);
}

TEST_CASE("toy shapes") {
  ToyOptions clean;
  clean.noise_sigma = 0;
  const auto sphere = synth_shape(ToyShape::sphere, 256, 1, clean);
  CHECK(sphere.size() == 256);
  for (const auto& q : sphere.points) CHECK(std::abs(norm(q) - 1.0) < 1e-6);

  clean.rotate = false;
  const auto cube = synth_shape(ToyShape::cube, 256, 2, clean);
  const auto inf = [](const Point3& q) {
    return std::max({std::abs(q[0]), std::abs(q[1]), std::abs(q[2])});
  };
  for (const auto& q : cube.points) CHECK(std::abs(inf(q) - inf(cube[0])) < 1e-12);

  const auto torus = synth_shape(ToyShape::torus, 256, 3);
  CHECK(max_norm(torus) == doctest::Approx(1.0));
  for (double m : mean(torus)) CHECK(std::abs(m) < 1e-12);

  CHECK(synth_shape(ToyShape::cube, 64, 5).points == synth_shape(ToyShape::cube, 64, 5).points);
  CHECK(parse_toy_shape("torus") == ToyShape::torus);
  CHECK(std::string(to_string(ToyShape::cube)) == "cube");
  CHECK_THROWS_AS(parse_toy_shape("cone"), std::invalid_argument);
}

TEST_CASE("toy dataset splits") {
  const std::vector<std::string> names{"sphere", "cube", "torus"};
  const Dataset train = synth_toy(names, 10, 64, 42, 0);
  const Dataset again = synth_toy(names, 10, 64, 42, 0);
  const Dataset test = synth_toy(names, 5, 64, 42, 1);
  CHECK(train.size() == 30);
  CHECK(test.size() == 15);
  CHECK(train.classes() == 3);
  for (std::size_t c = 0; c < 3; ++c)
    CHECK(std::count(train.labels.begin(), train.labels.end(), c) == 10);
  for (std::size_t i = 0; i < train.size(); ++i) {
    CHECK(train.clouds[i].points == again.clouds[i].points);
    CHECK(train.clouds[i].size() == 64);
  }
  std::set<std::vector<Point3>> seen;
  for (const auto& c : train.clouds) seen.insert(c.points);
  for (const auto& c : test.clouds) CHECK(seen.count(c.points) == 0);
  CHECK_THROWS_AS(synth_toy({"sphere", "pyramid"}, 1, 64, 1), std::invalid_argument);
}

TEST_CASE("dataset files round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "pointcont_data_test";
  std::filesystem::remove_all(dir);
  const std::vector<std::string> names{"sphere", "cube", "torus"};
  DatasetPair pair{synth_toy(names, 3, 32, 1, 0), synth_toy(names, 2, 32, 1, 1)};
  save_dataset(dir, pair);
  const DatasetPair back = load_dataset(dir);
  CHECK(back.train.class_names == names);
  CHECK(back.test.labels == pair.test.labels);
  for (std::size_t i = 0; i < back.train.size(); ++i)
    for (std::size_t p = 0; p < 32; ++p)
      for (int d = 0; d < 3; ++d)
        CHECK(back.train.clouds[i][p][d] == static_cast<double>(static_cast<float>(pair.train.clouds[i][p][d])));

  std::ofstream(dir / "test.pcnt", std::ios::binary) << "PCNT";
  CHECK_THROWS_AS(load_dataset(dir), FormatError);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(load_dataset(dir), std::ios_base::failure);
}
