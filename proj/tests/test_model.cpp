#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "helpers.hpp"
#include "pointcont/data.hpp"
#include "pointcont/errors.hpp"
#include "pointcont/model.hpp"
#include "pointcont/train.hpp"

using namespace pct;

namespace {

ModelConfig mini() {
  ModelConfig c;
  c.n_points = 64;
  c.width = 8;
  c.stages = 3;
  c.k = 8;
  c.cluster_size = 4;
  c.heads = 2;
  c.classes = 3;
  c.head_hidden = 16;
  return c;
}

std::string text(const ModelConfig& c) {
  std::ostringstream o;
  write_config(o, c);
  return o.str();
}

std::size_t parse_error_line(const std::string& s) {
  std::istringstream in(s);
  try {
    parse_config(in);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST_CASE("default model shapes") {
  ModelConfig c;
  Model m(c);
  CHECK(m.stage_count() == 5);
  const Matrix logits = m.forward(synth_shape(ToyShape::sphere, 1024, 1));
  CHECK(logits.rows() == 1);
  CHECK(logits.cols() == 40);
  CHECK(m.stage_output(4).feats.rows() == 32);
  CHECK(m.stage_output(4).feats.cols() == 512);
  for (std::size_t s = 0; s < 5; ++s) CHECK(m.stage(s).config().d_out == (32u << s));
  CHECK(m.pooled().cols() == 512);

  c.stages = 3;
  Model m3(c);
  m3.forward(synth_shape(ToyShape::cube, 1024, 1));
  CHECK(m3.stage_output(2).feats.rows() == 128);
  CHECK(m3.stage_output(2).feats.cols() == 128);
}

TEST_CASE("config constraints name what is wrong") {
  auto message = [](ModelConfig c) -> std::string {
    try {
      validate(c);
    } catch (const ConfigError& e) {
      return e.what();
    }
    return "";
  };
  CHECK(message(mini()).empty());
  ModelConfig c = mini();
  c.n_points = 60;
  CHECK(message(c).find("n_points") != std::string::npos);
  c = mini();
  c.cluster_size = 6;
  CHECK(message(c).find("cluster_size") != std::string::npos);
  c = mini();
  c.stages = 5;
  CHECK_FALSE(message(c).empty());
  c = mini();
  c.heads = 3;
  CHECK(message(c).find("heads") != std::string::npos);
  c = mini();
  c.toggles = {false, true, true, true};
  CHECK_THROWS_AS(Model{c}, ConfigError);
  c = mini();
  c.class_names = {"a", "b"};
  CHECK_FALSE(message(c).empty());
}

TEST_CASE("identical seeds give identical parameters and logits") {
  Model a(mini()), b(mini());
  const auto pa = a.params().all();
  const auto pb = b.params().all();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
  const auto cloud = synth_shape(ToyShape::torus, 64, 3);
  CHECK(testing::bitwise_equal(a.forward(cloud), b.forward(cloud)));
  ModelConfig other = mini();
  other.seed = 2;
  Model c(other);
  CHECK(c.params().at("head.fc1.weight").value != a.params().at("head.fc1.weight").value);
}

TEST_CASE("eval forward is side-effect free") {
  Model m(mini());
  const auto cloud = synth_shape(ToyShape::cube, 64, 4);
  const Matrix a = m.forward(cloud);
  const Matrix b = m.forward(cloud);
  CHECK(testing::bitwise_equal(a, b));
}

TEST_CASE("degenerate and wrong-size inputs") {
  Model m(mini());
  PointCloud same;
  same.points.assign(64, {0.5, -0.25, 0.125});
  const Matrix y = m.forward(same);
  for (double v : y.values()) CHECK(std::isfinite(v));
  CHECK_THROWS_AS(m.forward(testing::random_cloud(63, 1)), std::invalid_argument);
}

TEST_CASE("logits are invariant to point order") {
  Model m(mini());
  auto cloud = synth_shape(ToyShape::torus, 64, 8);
  const Matrix ref = m.forward(cloud);
  Rng rng(9);
  for (int t = 0; t < 10; ++t) {
    std::shuffle(cloud.points.begin(), cloud.points.end(), rng);
    const Matrix y = m.forward(cloud);
    CHECK(testing::max_abs_diff(y, ref) < 1e-5);
    CHECK(argmax_rows(y) == argmax_rows(ref));
  }
}

TEST_CASE("argmax ties go to the lowest index") {
  Matrix l(2, 3);
  l(0, 1) = 2;
  l(0, 2) = 2;
  CHECK(argmax_rows(l) == std::vector<std::size_t>{1, 0});
}

TEST_CASE("cross-entropy with label smoothing") {
  const std::vector<std::size_t> labels{0, 2};
  const LossResult u = cross_entropy(Matrix(2, 3), labels, 0.0);
  CHECK(u.loss == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  CHECK(u.grad(0, 0) == doctest::Approx((1.0 / 3 - 1) / 2));
  CHECK(u.grad(0, 1) == doctest::Approx(1.0 / 6));

  Matrix l(1, 3);
  l(0, 0) = 2;
  l(0, 1) = -1;
  l(0, 2) = 0.5;
  const double z = std::exp(2) + std::exp(-1) + std::exp(0.5);
  const double eps = 0.1;
  const double target[3] = {1 - eps + eps / 3, eps / 3, eps / 3};
  double ref = 0;
  for (int c = 0; c < 3; ++c) ref -= target[c] * (l(0, c) - std::log(z));
  const std::vector<std::size_t> one{0};
  const LossResult r = cross_entropy(l, one, eps);
  CHECK(r.loss == doctest::Approx(ref).epsilon(1e-12));
  CHECK(r.grad(0, 1) == doctest::Approx(std::exp(-1) / z - eps / 3));
  CHECK_THROWS_AS(cross_entropy(l, labels, 0.0), std::invalid_argument);
}

TEST_CASE("metrics") {
  const std::vector<std::size_t> truth{0, 0, 1, 1, 2, 2};
  auto m = compute_metrics(truth, truth, 3);
  CHECK(m.oa == 1.0);
  CHECK(m.macc == 1.0);
  const std::vector<std::size_t> constant(6, 0);
  m = compute_metrics(constant, truth, 3);
  CHECK(m.oa == doctest::Approx(1.0 / 3));
  CHECK(m.macc == doctest::Approx(1.0 / 3));
  // Recalls 1.0, 0.5, 0.0 with unequal class sizes.
  const std::vector<std::size_t> t2{0, 0, 0, 0, 1, 1, 2}, p2{0, 0, 0, 0, 1, 0, 1};
  m = compute_metrics(p2, t2, 3);
  CHECK(m.macc == doctest::Approx(0.5));
  CHECK(m.oa == doctest::Approx(5.0 / 7));
  CHECK(m.confusion[1][0] == 1);
  CHECK(m.confusion[2][1] == 1);
  const std::vector<std::size_t> none;
  CHECK_THROWS_AS(compute_metrics(none, none, 3), std::invalid_argument);
}

TEST_CASE("learning-rate schedule") {
  CHECK(scheduled_lr(0, 100, 0.1, 10) == doctest::Approx(0.01));
  CHECK(scheduled_lr(9, 100, 0.1, 10) == doctest::Approx(0.1));
  CHECK(scheduled_lr(10, 100, 0.1, 10) == doctest::Approx(0.1));
  CHECK(scheduled_lr(55, 100, 0.1, 10) == doctest::Approx(0.05));
  CHECK(scheduled_lr(100, 100, 0.1, 10) == doctest::Approx(0.0));
  CHECK(scheduled_lr(3, 10, 0.2, 0) == doctest::Approx(0.1 * (1 + std::cos(std::numbers::pi * 0.3))));
}

TEST_CASE("SGD momentum update") {
  ParamStore s;
  Rng rng(1);
  Tensor& t = s.create("w", {1}, Init::ones, rng);
  SgdMomentum opt(s, 0.9, 0.1);
  t.grad = {1.0};
  opt.step(0.5);  // g = 1.1, v = 1.1
  CHECK(t.value[0] == doctest::Approx(1 - 0.55));
  t.grad = {0.0};
  opt.step(0.5);  // g = 0.045, v = 0.99 + 0.045
  CHECK(t.value[0] == doctest::Approx(0.45 - 0.5 * 1.035));
}

TEST_CASE("a zero learning rate step only moves batch-norm statistics") {
  Model m(mini());
  SgdMomentum opt(m.params(), 0.9, 1e-4);
  std::vector<std::vector<double>> before;
  for (const Tensor* t : m.params().all()) before.push_back(t->value);
  std::vector<PointCloud> batch{synth_shape(ToyShape::sphere, 64, 1), synth_shape(ToyShape::cube, 64, 2)};
  const std::vector<std::size_t> labels{0, 1};
  train_step(m, opt, batch, labels, 0.0);
  bool stats_moved = false;
  const auto after = m.params().all();
  for (std::size_t i = 0; i < after.size(); ++i) {
    if (after[i]->trainable) CHECK(after[i]->value == before[i]);
    else stats_moved |= after[i]->value != before[i];
  }
  CHECK(stats_moved);
}

TEST_CASE("a single sample can be overfit") {
  ModelConfig c = mini();
  c.label_smoothing = 0.0;
  c.dropout = 0.0;
  Model m(c);
  SgdMomentum opt(m.params(), c.momentum, c.weight_decay);
  const std::vector<PointCloud> batch{synth_shape(ToyShape::torus, 64, 5)};
  const std::vector<std::size_t> label{2};
  double loss = 0;
  for (int step = 0; step < 200; ++step) loss = train_step(m, opt, batch, label, 0.01);
  CHECK(loss < 0.1);
  CHECK(cross_entropy(m.forward(batch, Mode{}), label, 0.0).loss < 0.1);
}

TEST_CASE("config text round trip and parse errors") {
  ModelConfig c = mini();
  c.attention_type = AttentionType::scalar;
  c.metric = Metric::cosine;
  c.toggles.cont = false;
  c.class_names = {"sphere", "cube", "torus"};
  c.lr = 0.0125;
  c.seed = 12345678901ULL;
  std::istringstream in(text(c));
  CHECK(text(parse_config(in)) == text(c));

  CHECK(parse_error_line("width = 8\n# note\nbogus = 1\n") == 3);
  CHECK(parse_error_line("width = 8\nwidth = 16\n") == 2);
  CHECK(parse_error_line("\nk = many\n") == 2);
  CHECK(parse_error_line("cont = maybe\n") == 1);
  CHECK(parse_error_line("no equals sign\n") == 1);
  std::istringstream partial("  width = 24   # trailing comment\n\nattention = vector\n");
  const ModelConfig p = parse_config(partial);
  CHECK(p.width == 24);
  CHECK(p.stages == 5);
  CHECK_THROWS_AS(load_config("/nonexistent/model.cfg"), std::ios_base::failure);
}

TEST_CASE("model save and load round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "pointcont_model_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "m.pcnt";
  ModelConfig c = mini();
  c.class_names = {"a", "b", "c"};
  Model m(c);
  SgdMomentum opt(m.params(), 0.9, 1e-4);
  const std::vector<PointCloud> batch{synth_shape(ToyShape::sphere, 64, 1),
                                      synth_shape(ToyShape::cube, 64, 2)};
  const std::vector<std::size_t> labels{0, 1};
  train_step(m, opt, batch, labels, 0.01);
  save_model(path, m);
  CHECK(std::filesystem::exists(sidecar_path(path)));
  Model back = load_model(path);
  CHECK(back.config().class_names == c.class_names);
  // Stored as f32: logits agree to single precision.
  const Matrix a = m.forward(batch), b = back.forward(batch);
  CHECK(testing::max_abs_diff(a, b) < 1e-4);
  CHECK(argmax_rows(a) == argmax_rows(b));
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(load_model(path), std::ios_base::failure);
}
