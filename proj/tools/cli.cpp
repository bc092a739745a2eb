#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "pointcont/bench.hpp"
#include "pointcont/checkpoint.hpp"
#include "pointcont/config.hpp"
#include "pointcont/data.hpp"
#include "pointcont/errors.hpp"
#include "pointcont/gradient_suite.hpp"
#include "pointcont/kernels.hpp"
#include "pointcont/model.hpp"
#include "pointcont/ply.hpp"
#include "pointcont/train.hpp"

namespace pct::cli {

namespace {

constexpr double kGradTolerance = 1e-4;

const char* kExitCodes =
    "Exit codes:\n"
    "  0  success\n"
    "  2  usage error (unknown command or flag, bad flag value)\n"
    "  3  I/O error (missing or unwritable file)\n"
    "  4  parse error (malformed OFF, config or PCNT file)\n"
    "  5  configuration error (a build constraint is violated)\n"
    "  6  constraint error (input incompatible with the model or command)\n"
    "  7  numeric error (non-finite training loss, gradient check failure)\n";

struct ConstraintError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

PointCloud cloud_from_off(const std::string& path, std::size_t n, std::uint64_t seed) {
  PointCloud raw;
  raw.points = load_off(path);
  return normalize_unit_sphere(sample_n(raw, n, seed));
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::ios_base::failure("cannot write " + path.string());
  out << text;
  if (!out) throw std::ios_base::failure("write failed: " + path.string());
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

struct Options {
  // gen-toy
  std::string out_dir;
  std::size_t per_class = 200, test_per_class = 50, points = 256;
  std::uint64_t seed = 42;
  double noise = 0.01;
  std::string classes = "sphere,cube,torus";
  bool no_rotate = false;
  // train / eval / classify / clusters
  std::string config, data, model_out, csv, model, input, ply_out, split = "test";
  bool quiet = false;
  std::size_t stage = 1, head = 0;
  std::uint64_t sample_seed = 0;
  // bench
  std::string variants = "local,pointtrans,cont";
  std::vector<std::size_t> s_list{1024}, k_list{16}, d_list{64};
  std::size_t repeats = 3, cluster_size = 16;
  bool exclude_clustering = false, parallel = false, count_only = false;
  std::uint64_t max_bytes = 1ULL << 30;
  std::string bench_out;
  // gradcheck
  bool full = false;
  double eps = 1e-5;
};

int gen_toy(const Options& o, std::ostream& out) {
  ToyOptions t;
  t.noise_sigma = o.noise;
  t.rotate = !o.no_rotate;
  const auto names = split_csv(o.classes);
  DatasetPair pair{synth_toy(names, o.per_class, o.points, o.seed, 0, t),
                   synth_toy(names, o.test_per_class, o.points, o.seed, 1, t)};
  save_dataset(o.out_dir, pair);
  out << "wrote " << pair.train.size() << " train and " << pair.test.size() << " test clouds to "
      << o.out_dir << '\n';
  return kOk;
}

int train(const Options& o, std::ostream& out) {
  ModelConfig cfg = load_config(o.config);
  const DatasetPair data = load_dataset(o.data);
  if (!cfg.class_names.empty() && cfg.class_names != data.train.class_names)
    throw ConfigError("class_names in the config differ from the dataset");
  cfg.classes = data.train.classes();
  cfg.class_names = data.train.class_names;
  if (data.train.size() == 0) throw ConstraintError("training split is empty");
  if (data.train.clouds.front().size() != cfg.n_points)
    throw ConfigError("n_points = " + std::to_string(cfg.n_points) + " but the dataset has " +
                      std::to_string(data.train.clouds.front().size()) + " points per cloud");
  Model model(cfg);
  const std::string csv_path = o.csv.empty() ? o.model_out + ".csv" : o.csv;
  std::ofstream csv(csv_path, std::ios::trunc);
  if (!csv) throw std::ios_base::failure("cannot write " + csv_path);
  FitOptions fo;
  fo.csv = &csv;
  fo.log = o.quiet ? nullptr : &out;
  const auto history = fit(model, data.train, data.test, fo);
  save_model(o.model_out, model);
  out << "final test OA " << std::fixed << std::setprecision(4) << history.back().test_oa
      << " mAcc " << history.back().test_macc << '\n';
  return kOk;
}

int eval(const Options& o, std::ostream& out) {
  Model model = load_model(o.model);
  const DatasetPair data = load_dataset(o.data);
  const Dataset& d = o.split == "train" ? data.train : data.test;
  if (d.classes() != model.config().classes)
    throw ConstraintError("dataset has " + std::to_string(d.classes()) +
                          " classes, model has " + std::to_string(model.config().classes));
  if (d.size() == 0) throw ConstraintError("split is empty");
  if (d.clouds.front().size() != model.config().n_points)
    throw ConstraintError("dataset clouds do not have n_points points");
  const Metrics m = evaluate(model, d);
  out << std::fixed << std::setprecision(4) << "OA " << m.oa << "\nmAcc " << m.macc << '\n';
  return kOk;
}

std::string class_name(const ModelConfig& cfg, std::size_t c) {
  return c < cfg.class_names.size() ? cfg.class_names[c] : std::to_string(c);
}

int classify(const Options& o, std::ostream& out) {
  Model model = load_model(o.model);
  const PointCloud cloud = cloud_from_off(o.input, model.config().n_points, o.sample_seed);
  const Matrix logits = model.forward(cloud);
  const std::size_t c = argmax_rows(logits).front();
  out << "class " << class_name(model.config(), c) << "\nlogits";
  out << std::setprecision(9);
  for (double v : logits.row(0)) out << ' ' << v;
  out << '\n';
  return kOk;
}

int clusters(const Options& o, std::ostream& out) {
  Model model = load_model(o.model);
  const ModelConfig& cfg = model.config();
  if (!cfg.toggles.cont) throw ConstraintError("model has no content attention (cont = false)");
  if (o.stage < 1 || o.stage > cfg.stages)
    throw ConstraintError("--stage must be in [1, " + std::to_string(cfg.stages) + "]");
  if (o.head >= cfg.heads)
    throw ConstraintError("--head must be in [0, " + std::to_string(cfg.heads - 1) + "]");
  const PointCloud cloud = cloud_from_off(o.input, cfg.n_points, o.sample_seed);
  model.forward(cloud);
  const ClusterAssignment& a = model.stage(o.stage - 1).attention()->assignment(0, o.head);
  const auto labels = a.labels();
  const PointCloud& pts = model.stage_output(o.stage - 1).coords.front();

  std::ostringstream ply;
  write_cluster_ply(ply, pts, labels);
  std::string csv_text;
  if (!o.csv.empty()) {
    std::ostringstream csv;
    write_cluster_csv(csv, o.stage, o.head, labels);
    csv_text = csv.str();
  }
  write_file(o.ply_out, ply.str());
  if (!o.csv.empty()) write_file(o.csv, csv_text);
  out << "stage " << o.stage << " head " << o.head << ": " << pts.size() << " points in "
      << a.clusters << " clusters of " << a.cluster_size << '\n';
  return kOk;
}

int bench(const Options& o, std::ostream& out) {
  retain_freed_memory();
  std::vector<MsaVariant> variants;
  for (const auto& v : split_csv(o.variants)) {
    try {
      variants.push_back(parse_msa_variant(v));
    } catch (const std::invalid_argument& e) {
      throw ConstraintError(e.what());
    }
  }
  BenchOptions bo;
  bo.repeats = o.repeats;
  bo.timing = !o.count_only;
  bo.include_clustering = !o.exclude_clustering;
  bo.cluster_size = o.cluster_size;
  bo.seed = o.seed;
  bo.max_bytes = o.max_bytes;
  kernels::ScopedExec exec(o.parallel ? kernels::Exec::parallel : kernels::Exec::serial);
  const auto rows = sweep(variants, o.s_list, o.k_list, o.d_list, bo);
  std::ostringstream csv;
  write_bench_csv(csv, rows);
  if (o.bench_out.empty())
    out << csv.str();
  else
    write_file(o.bench_out, csv.str());
  return kOk;
}

int gradcheck_cmd(const Options& o, std::ostream& out) {
  SuiteOptions so;
  so.full = o.full;
  so.eps = o.eps;
  if (o.full) so.probes_per_tensor = 24;
  const auto entries = run_gradient_suite(so);
  bool ok = true;
  out << std::left << std::setw(28) << "op" << "max_rel_error\n";
  for (const auto& e : entries) {
    const bool pass = e.report.finite && e.report.max_rel_error <= kGradTolerance;
    ok = ok && pass;
    out << std::left << std::setw(28) << e.op << std::scientific << std::setprecision(3)
        << e.report.max_rel_error << (pass ? "" : "  FAIL") << '\n';
  }
  if (!ok)
    throw NumericError("gradient check above tolerance " + std::to_string(kGradTolerance));
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Point cloud classification with content-based attention", "pointcont"};
  app.footer(kExitCodes);
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-toy", "Generate the sphere/cube/torus toy dataset");
  gen->add_option("--out", o.out_dir, "Output directory")->required();
  gen->add_option("--per-class", o.per_class, "Training clouds per class")->capture_default_str();
  gen->add_option("--test-per-class", o.test_per_class, "Test clouds per class")
      ->capture_default_str();
  gen->add_option("--points", o.points, "Points per cloud")->capture_default_str();
  gen->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  gen->add_option("--noise", o.noise, "Gaussian jitter sigma")->capture_default_str();
  gen->add_option("--classes", o.classes, "Comma-separated shapes")->capture_default_str();
  gen->add_flag("--no-rotate", o.no_rotate, "Skip the random rotation about z");

  auto* tr = app.add_subcommand("train", "Train a model");
  tr->add_option("--config", o.config, "Model config (key = value)")->required();
  tr->add_option("--data", o.data, "Dataset directory")->required();
  tr->add_option("--out", o.model_out, "Checkpoint path")->required();
  tr->add_option("--csv", o.csv, "Per-epoch metrics CSV (default: <out>.csv)");
  tr->add_flag("--quiet", o.quiet, "No per-epoch progress lines");

  auto* ev = app.add_subcommand("eval", "Report OA and mAcc on a dataset split");
  ev->add_option("--model", o.model, "Checkpoint path")->required();
  ev->add_option("--data", o.data, "Dataset directory")->required();
  ev->add_option("--split", o.split, "train or test")
      ->check(CLI::IsMember({"train", "test"}))
      ->capture_default_str();

  auto* cl = app.add_subcommand("classify", "Classify the vertices of an OFF file");
  cl->add_option("--model", o.model, "Checkpoint path")->required();
  cl->add_option("--input", o.input, "OFF file")->required();
  cl->add_option("--seed", o.sample_seed, "Point sampling seed")->capture_default_str();

  auto* cu = app.add_subcommand("clusters", "Export the feature-space clusters of one head");
  cu->add_option("--model", o.model, "Checkpoint path")->required();
  cu->add_option("--input", o.input, "OFF file")->required();
  cu->add_option("--stage", o.stage, "Stage, 1-based")->capture_default_str();
  cu->add_option("--head", o.head, "Head, 0-based")->capture_default_str();
  cu->add_option("--out", o.ply_out, "PLY output")->required();
  cu->add_option("--csv", o.csv, "Also write stage,head,point_index,cluster_id rows here");
  cu->add_option("--seed", o.sample_seed, "Point sampling seed")->capture_default_str();

  auto* be = app.add_subcommand("bench", "Count MACs and time the attention variants");
  be->add_option("--variants", o.variants, "Comma-separated: local,pointtrans,cont")
      ->capture_default_str();
  be->add_option("--S", o.s_list, "Item counts")->delimiter(',')->capture_default_str();
  be->add_option("--k", o.k_list, "Neighborhood sizes")->delimiter(',')->capture_default_str();
  be->add_option("--d", o.d_list, "Channel widths")->delimiter(',')->capture_default_str();
  be->add_option("--repeats", o.repeats, "Timed repeats (>= 3)")->capture_default_str();
  be->add_option("--cluster-size", o.cluster_size, "Cluster size for cont")
      ->capture_default_str();
  be->add_option("--seed", o.seed, "Input seed")->capture_default_str();
  be->add_option("--max-bytes", o.max_bytes, "Working-set cap")->capture_default_str();
  be->add_flag("--exclude-clustering", o.exclude_clustering, "Cluster outside the timed region");
  be->add_flag("--count-only", o.count_only, "One counted run, no timing");
  be->add_flag("--parallel", o.parallel, "Use the OpenMP kernels");
  be->add_option("--out", o.bench_out, "CSV output (default: stdout)");

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  gc->add_flag("--full", o.full, "More probes and extra model variants");
  gc->add_option("--eps", o.eps, "Central-difference step")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << e.what() << '\n';
    return kUsage;
  }

  auto fail = [&](int code, const char* kind, const std::string& msg) {
    err << "error: " << kind << ": " << msg << '\n';
    return code;
  };
  try {
    if (gen->parsed()) return gen_toy(o, out);
    if (tr->parsed()) return train(o, out);
    if (ev->parsed()) return eval(o, out);
    if (cl->parsed()) return classify(o, out);
    if (cu->parsed()) return clusters(o, out);
    if (be->parsed()) return bench(o, out);
    if (gc->parsed()) return gradcheck_cmd(o, out);
  } catch (const ParseError& e) {
    return fail(kParse, "parse", e.what());
  } catch (const FormatError& e) {
    return fail(kParse, "parse", e.what());
  } catch (const ConfigError& e) {
    return fail(kConfig, "config", e.what());
  } catch (const NumericError& e) {
    return fail(kNumeric, "numeric", e.what());
  } catch (const ConstraintError& e) {
    return fail(kConstraint, "constraint", e.what());
  } catch (const std::ios_base::failure& e) {
    return fail(kIo, "io", e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(kIo, "io", e.what());
  } catch (const std::invalid_argument& e) {
    return fail(kConstraint, "constraint", e.what());
  } catch (const std::exception& e) {
    return fail(kConstraint, "constraint", e.what());
  }
  return fail(kUsage, "usage", "no command given");
}

}  // namespace pct::cli
