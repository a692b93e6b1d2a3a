#include "efcn/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "efcn/error.hpp"

namespace efcn {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  fail(ErrorKind::Config, where + ": " + what);
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) bad(where, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return key == k; });
    if (!known) bad(where, "unknown key '" + key + "'");
  }
}

template <typename T>
T get(const json& obj, const char* key, const std::string& where, T fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    bad(where + "." + key, "wrong type");
  }
}

std::size_t get_count(const json& obj, const char* key, const std::string& where, std::size_t fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number_integer() || it->get<long long>() < 0) bad(where + "." + key, "expected a non-negative integer");
  return it->get<std::size_t>();
}

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv: return "conv";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::Deconv: return "deconv";
    case LayerKind::Skip: return "skip";
  }
  return "?";
}

json layer_to_json(const LayerSpec& l) {
  json j;
  j["kind"] = kind_name(l.kind);
  switch (l.kind) {
    case LayerKind::Conv:
    case LayerKind::Deconv:
      j["kernel"] = {l.kernel_h, l.kernel_w};
      j["filters"] = l.filters;
      j["stride"] = l.stride;
      j["activation"] = l.activation == Activation::Relu ? "relu" : "none";
      break;
    case LayerKind::MaxPool:
      j["window"] = l.window;
      break;
    case LayerKind::Skip:
      j["from"] = l.from;
      break;
  }
  return j;
}

LayerSpec layer_from_json(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) bad(where, "layer needs a 'kind'");
  const std::string kind = j["kind"];
  LayerSpec l;
  if (kind == "conv" || kind == "deconv") {
    check_keys(j, {"kind", "kernel", "filters", "stride", "activation"}, where);
    l.kind = kind == "conv" ? LayerKind::Conv : LayerKind::Deconv;
    if (j.contains("kernel")) {
      const json& k = j["kernel"];
      if (k.is_number_integer()) {
        l.kernel_h = l.kernel_w = k.get<std::size_t>();
      } else if (k.is_array() && k.size() == 2 && k[0].is_number_integer() && k[1].is_number_integer()) {
        l.kernel_h = k[0].get<std::size_t>();
        l.kernel_w = k[1].get<std::size_t>();
      } else {
        bad(where + ".kernel", "expected an integer or [h, w]");
      }
    }
    l.filters = get_count(j, "filters", where, l.filters);
    l.stride = get_count(j, "stride", where, l.stride);
    const std::string act = get<std::string>(j, "activation", where, kind == "conv" ? "relu" : "none");
    if (act == "relu") l.activation = Activation::Relu;
    else if (act == "none") l.activation = Activation::None;
    else bad(where + ".activation", "expected 'relu' or 'none'");
    if (l.kernel_h == 0 || l.kernel_w == 0 || l.filters == 0 || l.stride == 0) bad(where, "sizes must be positive");
  } else if (kind == "maxpool") {
    check_keys(j, {"kind", "window"}, where);
    // Fields a layer kind does not use are kept at fixed values so parsed
    // and preset architectures compare equal.
    l = LayerSpec{LayerKind::MaxPool, 1, 1, 0, 1, 2, Activation::None, -1};
    l.window = get_count(j, "window", where, l.window);
    if (l.window == 0) bad(where, "window must be positive");
  } else if (kind == "skip") {
    check_keys(j, {"kind", "from"}, where);
    l = LayerSpec{LayerKind::Skip, 1, 1, 0, 1, 2, Activation::None, -1};
    l.from = get<int>(j, "from", where, -1);
  } else {
    bad(where + ".kind", "unknown layer kind '" + kind + "'");
  }
  return l;
}

json architecture_json(const Architecture& arch) {
  json layers = json::array();
  for (const auto& l : arch.layers) layers.push_back(layer_to_json(l));
  return json{{"input_channels", arch.input_channels}, {"layers", layers}};
}

Architecture architecture_from(const json& j, const std::string& where) {
  check_keys(j, {"input_channels", "layers"}, where);
  Architecture arch;
  arch.input_channels = get_count(j, "input_channels", where, 3);
  if (!j.contains("layers") || !j["layers"].is_array() || j["layers"].empty()) bad(where, "needs a non-empty 'layers' list");
  for (std::size_t i = 0; i < j["layers"].size(); ++i)
    arch.layers.push_back(layer_from_json(j["layers"][i], where + ".layers[" + std::to_string(i) + "]"));
  return arch;
}

json parse_json(std::string_view text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    bad(where, std::string("not valid JSON: ") + e.what());
  }
}

}  // namespace

std::vector<double> RunConfig::gamma_grid() const {
  if (!metrics.gamma_grid.empty()) return metrics.gamma_grid;
  std::vector<double> grid;
  for (int i = 0; i <= 10; ++i) grid.push_back(0.5 + 0.05 * i);
  return grid;
}

std::string format_class_set(const Frame& frame, ClassSet s) {
  if (s == frame.omega()) return "Omega";
  std::string out;
  for (std::size_t j = 0; j < frame.size(); ++j) {
    if (!s.contains(j)) continue;
    if (!out.empty()) out += '+';
    out += frame.name(j);
  }
  return out;
}

ClassSet parse_class_set(const Frame& frame, std::string_view text) {
  if (text == "Omega") return frame.omega();
  ClassSet s;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find('+', start), text.size());
    const std::string name(text.substr(start, end - start));
    const auto idx = frame.index_of(name);
    if (!idx) fail(ErrorKind::InvalidLabel, "unknown class '" + name + "'");
    s = s | ClassSet::singleton(*idx);
    start = end + 1;
  }
  return s;
}

RunConfig parse_run_config(std::string_view json_text) {
  const json root = parse_json(json_text, "config");
  check_keys(root, {"classes", "architecture", "features", "prototypes", "acts", "gamma", "utility_matrix", "training",
                    "metrics", "synthetic", "seed"},
             "config");
  RunConfig cfg;
  if (!root.contains("classes") || !root["classes"].is_array()) bad("config.classes", "required list of class names");
  for (const auto& c : root["classes"]) {
    if (!c.is_string()) bad("config.classes", "class names must be strings");
    cfg.classes.push_back(c.get<std::string>());
  }
  Frame frame = [&] {
    try {
      return cfg.frame();
    } catch (const Error& e) {
      bad("config.classes", e.what());
    }
  }();
  const std::size_t m = frame.size();

  cfg.seed = get<std::uint64_t>(root, "seed", "config", 0);
  const std::size_t features = get_count(root, "features", "config", 16);
  if (features == 0) bad("config.features", "must be positive");
  if (!root.contains("architecture") || root["architecture"].is_string()) {
    const std::string preset = get<std::string>(root, "architecture", "config", "toy");
    if (preset == "toy") cfg.architecture = Architecture::toy(3, features);
    else if (preset == "toy_skip") cfg.architecture = Architecture::toy_skip(3, features);
    else bad("config.architecture", "unknown preset '" + preset + "'");
  } else {
    if (root.contains("features")) bad("config.features", "only applies to architecture presets");
    cfg.architecture = architecture_from(root["architecture"], "config.architecture");
  }

  cfg.prototypes = get_count(root, "prototypes", "config", 0);

  if (root.contains("acts")) {
    const json& a = root["acts"];
    if (a.is_string()) {
      const std::string p = a.get<std::string>();
      if (p == "singletons") cfg.acts = ActPolicy::Singletons;
      else if (p == "soft_labels") cfg.acts = ActPolicy::SoftLabels;
      else bad("config.acts", "expected 'singletons', 'soft_labels' or a list of sets");
    } else if (a.is_array()) {
      cfg.acts = ActPolicy::Explicit;
      for (const auto& s : a) {
        if (!s.is_string()) bad("config.acts", "sets are written as 'a+b' or 'Omega'");
        try {
          cfg.explicit_acts.push_back(parse_class_set(frame, s.get<std::string>()));
        } catch (const Error& e) {
          bad("config.acts", e.what());
        }
      }
    } else {
      bad("config.acts", "wrong type");
    }
  }

  cfg.gamma = get<double>(root, "gamma", "config", 0.8);
  if (!(cfg.gamma >= 0.5 && cfg.gamma <= 1.0)) bad("config.gamma", "must lie in [0.5, 1]");
  cfg.training.gamma = cfg.gamma;

  if (root.contains("utility_matrix")) {
    const json& u = root["utility_matrix"];
    if (!u.is_array() || u.size() != m) bad("config.utility_matrix", "expected " + std::to_string(m) + " rows");
    Matrix mat(m, m);
    for (std::size_t r = 0; r < m; ++r) {
      if (!u[r].is_array() || u[r].size() != m) bad("config.utility_matrix", "row " + std::to_string(r) + " has wrong length");
      for (std::size_t c = 0; c < m; ++c) {
        if (!u[r][c].is_number()) bad("config.utility_matrix", "entries must be numbers");
        mat(r, c) = u[r][c].get<double>();
        if (!(mat(r, c) >= 0.0 && mat(r, c) <= 1.0)) bad("config.utility_matrix", "entries must lie in [0, 1]");
      }
    }
    cfg.utility_matrix = mat;
  }

  if (root.contains("training")) {
    const json& t = root["training"];
    const std::string w = "config.training";
    check_keys(t, {"learning_rate", "epochs", "batch_size", "seed", "optimizer", "momentum"}, w);
    cfg.training.learning_rate = get<double>(t, "learning_rate", w, cfg.training.learning_rate);
    cfg.training.epochs = get_count(t, "epochs", w, cfg.training.epochs);
    cfg.training.batch_size = get_count(t, "batch_size", w, cfg.training.batch_size);
    cfg.training.seed = get<std::uint64_t>(t, "seed", w, cfg.seed);
    cfg.training.momentum = get<double>(t, "momentum", w, cfg.training.momentum);
    const std::string opt = get<std::string>(t, "optimizer", w, "sgd_momentum");
    if (opt == "sgd") cfg.training.optimizer = Optimizer::Sgd;
    else if (opt == "sgd_momentum") cfg.training.optimizer = Optimizer::SgdMomentum;
    else bad(w + ".optimizer", "expected 'sgd' or 'sgd_momentum'");
    if (!(cfg.training.learning_rate >= 0.0) || !std::isfinite(cfg.training.learning_rate))
      bad(w + ".learning_rate", "must be a non-negative number");
    if (cfg.training.batch_size == 0) bad(w + ".batch_size", "must be positive");
    if (!(cfg.training.momentum >= 0.0 && cfg.training.momentum < 1.0)) bad(w + ".momentum", "must lie in [0, 1)");
  } else {
    cfg.training.seed = cfg.seed;
  }

  if (root.contains("metrics")) {
    const json& mj = root["metrics"];
    check_keys(mj, {"bins", "gamma_grid"}, "config.metrics");
    cfg.metrics.bins = get_count(mj, "bins", "config.metrics", 10);
    if (cfg.metrics.bins == 0) bad("config.metrics.bins", "must be positive");
    cfg.metrics.gamma_grid = get<std::vector<double>>(mj, "gamma_grid", "config.metrics", {});
    for (double g : cfg.metrics.gamma_grid) {
      if (!(g >= 0.5 && g <= 1.0)) bad("config.metrics.gamma_grid", "values must lie in [0.5, 1]");
    }
  }

  cfg.synthetic.seed = cfg.seed;
  if (root.contains("synthetic")) {
    const json& s = root["synthetic"];
    const std::string w = "config.synthetic";
    check_keys(s, {"train", "val", "test", "height", "width", "seed", "boundary_width", "noise", "edge_blur", "min_shape", "max_shape",
                   "max_shapes", "unknown_in_test"},
               w);
    auto& sc = cfg.synthetic;
    sc.train = get_count(s, "train", w, sc.train);
    sc.val = get_count(s, "val", w, sc.val);
    sc.test = get_count(s, "test", w, sc.test);
    sc.height = get_count(s, "height", w, sc.height);
    sc.width = get_count(s, "width", w, sc.width);
    sc.seed = get<std::uint64_t>(s, "seed", w, cfg.seed);
    sc.boundary_width = get_count(s, "boundary_width", w, sc.boundary_width);
    sc.noise = get<double>(s, "noise", w, sc.noise);
    sc.edge_blur = get<double>(s, "edge_blur", w, sc.edge_blur);
    sc.min_shape = get_count(s, "min_shape", w, sc.min_shape);
    sc.max_shape = get_count(s, "max_shape", w, sc.max_shape);
    sc.max_shapes = get_count(s, "max_shapes", w, sc.max_shapes);
    sc.unknown_in_test = get<bool>(s, "unknown_in_test", w, sc.unknown_in_test);
    if (!(sc.noise >= 0.0)) bad(w + ".noise", "must be non-negative");
  }

  try {
    const auto shapes = infer_shapes(cfg.architecture, cfg.synthetic.height, cfg.synthetic.width);
    if (shapes.back().height != cfg.synthetic.height || shapes.back().width != cfg.synthetic.width)
      bad("config.architecture", "output does not match the input resolution");
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Config) throw;
    bad("config.architecture", e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string run_config_to_json(const RunConfig& cfg) {
  const Frame frame = cfg.frame();
  json root;
  root["classes"] = cfg.classes;
  root["architecture"] = architecture_json(cfg.architecture);
  root["prototypes"] = cfg.prototypes;
  switch (cfg.acts) {
    case ActPolicy::Singletons: root["acts"] = "singletons"; break;
    case ActPolicy::SoftLabels: root["acts"] = "soft_labels"; break;
    case ActPolicy::Explicit: {
      json list = json::array();
      for (ClassSet s : cfg.explicit_acts) list.push_back(format_class_set(frame, s));
      root["acts"] = list;
      break;
    }
  }
  root["gamma"] = cfg.gamma;
  if (cfg.utility_matrix) {
    json rows = json::array();
    for (std::size_t r = 0; r < cfg.utility_matrix->rows; ++r) {
      const auto row = cfg.utility_matrix->row(r);
      rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    root["utility_matrix"] = rows;
  }
  const auto& t = cfg.training;
  root["training"] = {{"learning_rate", t.learning_rate}, {"epochs", t.epochs}, {"batch_size", t.batch_size},
                      {"seed", t.seed}, {"momentum", t.momentum},
                      {"optimizer", t.optimizer == Optimizer::Sgd ? "sgd" : "sgd_momentum"}};
  root["metrics"] = {{"bins", cfg.metrics.bins}, {"gamma_grid", cfg.metrics.gamma_grid}};
  const auto& s = cfg.synthetic;
  root["synthetic"] = {{"train", s.train}, {"val", s.val}, {"test", s.test}, {"height", s.height}, {"width", s.width},
                       {"seed", s.seed}, {"boundary_width", s.boundary_width}, {"noise", s.noise}, {"edge_blur", s.edge_blur},
                       {"min_shape", s.min_shape}, {"max_shape", s.max_shape}, {"max_shapes", s.max_shapes},
                       {"unknown_in_test", s.unknown_in_test}};
  root["seed"] = cfg.seed;
  return root.dump(2);
}

std::string architecture_to_json(const Architecture& arch) { return architecture_json(arch).dump(); }

Architecture architecture_from_json(std::string_view json_text) {
  return architecture_from(parse_json(json_text, "architecture"), "architecture");
}

ActList resolve_acts(const RunConfig& cfg, const Frame& frame, std::span<const ClassSet> soft_labels) {
  switch (cfg.acts) {
    case ActPolicy::Singletons: return build_act_list(frame, {});
    case ActPolicy::SoftLabels: return build_act_list(frame, soft_labels);
    case ActPolicy::Explicit: break;
  }
  return build_act_list(frame, cfg.explicit_acts);
}

UtilityTable make_table(const RunConfig& cfg, const Frame& frame, const ActList& acts, double gamma,
                        std::vector<ClassSet> labels) {
  if (cfg.utility_matrix) return UtilityTable(*cfg.utility_matrix, acts, gamma, std::move(labels));
  return UtilityTable::identity(frame, acts, gamma, std::move(labels));
}

}  // namespace efcn
