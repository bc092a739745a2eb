#include "pointcont/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "pointcont/errors.hpp"

namespace pct {

namespace {

std::string trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return std::string(s.substr(b, s.find_last_not_of(ws) - b + 1));
}

template <typename T>
T parse_number(const std::string& v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw std::invalid_argument("not a number");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw std::invalid_argument("not a boolean");
}

std::string fmt(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw std::invalid_argument("empty list item");
    out.push_back(item);
  }
  return out;
}

struct Field {
  std::function<void(ModelConfig&, const std::string&)> read;
  std::function<std::string(const ModelConfig&)> write;
};

template <typename T>
Field num(T ModelConfig::*m) {
  return {[m](ModelConfig& c, const std::string& v) { c.*m = parse_number<T>(v); },
          [m](const ModelConfig& c) {
            if constexpr (std::is_floating_point_v<T>)
              return fmt(c.*m);
            else
              return std::to_string(c.*m);
          }};
}

Field flag(bool ModelConfig::*m) {
  return {[m](ModelConfig& c, const std::string& v) { c.*m = parse_bool(v); },
          [m](const ModelConfig& c) { return std::string(c.*m ? "true" : "false"); }};
}

Field toggle(bool StageToggles::*m) {
  return {[m](ModelConfig& c, const std::string& v) { c.toggles.*m = parse_bool(v); },
          [m](const ModelConfig& c) { return std::string(c.toggles.*m ? "true" : "false"); }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"n_points", num(&ModelConfig::n_points)},
      {"width", num(&ModelConfig::width)},
      {"stages", num(&ModelConfig::stages)},
      {"k", num(&ModelConfig::k)},
      {"cluster_size", num(&ModelConfig::cluster_size)},
      {"heads", num(&ModelConfig::heads)},
      {"attention",
       {[](ModelConfig& c, const std::string& v) {
          if (v == "vector") c.attention_type = AttentionType::vector;
          else if (v == "scalar") c.attention_type = AttentionType::scalar;
          else throw std::invalid_argument("expected vector or scalar");
        },
        [](const ModelConfig& c) { return std::string(to_string(c.attention_type)); }}},
      {"metric",
       {[](ModelConfig& c, const std::string& v) {
          if (v == "euclidean") c.metric = Metric::euclidean;
          else if (v == "cosine") c.metric = Metric::cosine;
          else throw std::invalid_argument("expected euclidean or cosine");
        },
        [](const ModelConfig& c) { return std::string(to_string(c.metric)); }}},
      {"initial_division",
       {[](ModelConfig& c, const std::string& v) {
          if (v == "norm_rank") c.initial_division = InitialDivision::norm_rank;
          else if (v == "random") c.initial_division = InitialDivision::seeded_random;
          else throw std::invalid_argument("expected norm_rank or random");
        },
        [](const ModelConfig& c) {
          return std::string(c.initial_division == InitialDivision::norm_rank ? "norm_rank"
                                                                              : "random");
        }}},
      {"classes", num(&ModelConfig::classes)},
      {"class_names",
       {[](ModelConfig& c, const std::string& v) { c.class_names = split_list(v); },
        [](const ModelConfig& c) {
          std::string out;
          for (std::size_t i = 0; i < c.class_names.size(); ++i)
            out += (i ? "," : "") + c.class_names[i];
          return out;
        }}},
      {"max_pool", toggle(&StageToggles::max_pool)},
      {"res_mlp", toggle(&StageToggles::res_mlp)},
      {"avg_pool", toggle(&StageToggles::avg_pool)},
      {"cont", toggle(&StageToggles::cont)},
      {"res_hidden_ratio", num(&ModelConfig::res_hidden_ratio)},
      {"pre_norm", flag(&ModelConfig::pre_norm)},
      {"attn_residual", flag(&ModelConfig::attn_residual)},
      {"feed_forward", flag(&ModelConfig::feed_forward)},
      {"ffn_expansion", num(&ModelConfig::ffn_expansion)},
      {"activation",
       {[](ModelConfig& c, const std::string& v) {
          if (v == "relu") c.activation = ActivationKind::relu;
          else if (v == "leaky_relu") c.activation = ActivationKind::leaky_relu;
          else throw std::invalid_argument("expected relu or leaky_relu");
        },
        [](const ModelConfig& c) {
          return std::string(c.activation == ActivationKind::relu ? "relu" : "leaky_relu");
        }}},
      {"head_hidden", num(&ModelConfig::head_hidden)},
      {"dropout", num(&ModelConfig::dropout)},
      {"lr", num(&ModelConfig::lr)},
      {"momentum", num(&ModelConfig::momentum)},
      {"weight_decay", num(&ModelConfig::weight_decay)},
      {"warmup_steps", num(&ModelConfig::warmup_steps)},
      {"label_smoothing", num(&ModelConfig::label_smoothing)},
      {"epochs", num(&ModelConfig::epochs)},
      {"batch_size", num(&ModelConfig::batch_size)},
      {"augment", flag(&ModelConfig::augment)},
      {"scale_min", num(&ModelConfig::scale_min)},
      {"scale_max", num(&ModelConfig::scale_max)},
      {"translate", num(&ModelConfig::translate)},
      {"seed", num(&ModelConfig::seed)},
  };
  return table;
}

bool power_of_two(std::size_t x) { return x != 0 && (x & (x - 1)) == 0; }

}  // namespace

const char* to_string(AttentionType t) {
  switch (t) {
    case AttentionType::scalar: return "scalar";
    case AttentionType::vector: return "vector";
    case AttentionType::none: return "none";
  }
  return "?";
}

const char* to_string(Metric m) { return m == Metric::euclidean ? "euclidean" : "cosine"; }

void validate(const ModelConfig& c) {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (c.stages == 0) fail("stages must be >= 1");
  if (c.stages >= 8 * sizeof(std::size_t)) fail("stages too large");
  if (c.width == 0) fail("width must be >= 1");
  if (c.heads == 0) fail("heads must be >= 1");
  if (c.n_points == 0 || c.n_points % (std::size_t{1} << c.stages) != 0)
    fail("n_points must be divisible by 2^stages");
  if (!power_of_two(c.cluster_size)) fail("cluster_size must be a power of two");
  if (c.final_points() < c.cluster_size) fail("n_points / 2^stages must be >= cluster_size");
  if (c.k == 0) fail("k must be >= 1");
  // The last stage groups the fewest points.
  if (c.k > (c.n_points >> (c.stages - 1))) fail("k must not exceed the points entering the last stage");
  if (c.toggles.cont)
    for (std::size_t m = 0; m < c.stages; ++m)
      if (c.stage_width(m) % c.heads != 0) fail("every stage width must be divisible by heads");
  validate(c.toggles);
  if (c.classes < 2) fail("classes must be >= 2");
  if (!c.class_names.empty() && c.class_names.size() != c.classes)
    fail("class_names must list exactly `classes` names");
  if (c.head_hidden == 0) fail("head_hidden must be >= 1");
  if (c.ffn_expansion == 0) fail("ffn_expansion must be >= 1");
  if (!(c.res_hidden_ratio > 0.0)) fail("res_hidden_ratio must be > 0");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) fail("dropout must be in [0, 1)");
  if (!(c.lr >= 0.0)) fail("lr must be >= 0");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) fail("momentum must be in [0, 1)");
  if (!(c.weight_decay >= 0.0)) fail("weight_decay must be >= 0");
  if (!(c.label_smoothing >= 0.0 && c.label_smoothing < 1.0))
    fail("label_smoothing must be in [0, 1)");
  if (c.batch_size == 0) fail("batch_size must be >= 1");
  if (!(c.scale_min > 0.0 && c.scale_min <= c.scale_max)) fail("need 0 < scale_min <= scale_max");
  if (!(c.translate >= 0.0)) fail("translate must be >= 0");
}

ModelConfig parse_config(std::istream& in) {
  ModelConfig cfg;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError(lineno, "expected `key = value`");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    const auto it = fields().find(key);
    if (it == fields().end()) throw ParseError(lineno, "unknown key `" + key + "`");
    if (!seen.insert(key).second) throw ParseError(lineno, "repeated key `" + key + "`");
    try {
      it->second.read(cfg, value);
    } catch (const std::invalid_argument& e) {
      throw ParseError(lineno, "bad value `" + value + "` for " + key + ": " + e.what());
    } catch (const std::out_of_range&) {
      throw ParseError(lineno, "value out of range for " + key);
    }
  }
  return cfg;
}

ModelConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open " + path.string());
  return parse_config(in);
}

void write_config(std::ostream& out, const ModelConfig& cfg) {
  for (const auto& [key, field] : fields()) {
    const std::string v = field.write(cfg);
    if (key == "class_names" && v.empty()) continue;
    out << key << " = " << v << '\n';
  }
}

void save_config(const std::filesystem::path& path, const ModelConfig& cfg) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::ios_base::failure("cannot write " + path.string());
  write_config(out, cfg);
  if (!out) throw std::ios_base::failure("write failed: " + path.string());
}

}  // namespace pct
