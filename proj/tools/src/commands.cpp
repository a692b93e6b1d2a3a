#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "efcn/checkpoint.hpp"
#include "efcn/config.hpp"
#include "efcn/data.hpp"
#include "efcn/error.hpp"
#include "efcn/metrics.hpp"
#include "efcn/training.hpp"
#include "efcn/utility.hpp"
#include "ppm.hpp"

namespace efcn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kDefaultConfig = R"({"classes": ["background", "class1", "class2"]})";

RunConfig config_or_default(const std::string& path) {
  return path.empty() ? parse_run_config(kDefaultConfig) : load_run_config(path);
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

const std::vector<std::size_t>& split_of(const SegDataset& ds, const std::string& name) {
  if (name == "train") return ds.train;
  if (name == "val") return ds.val;
  if (name == "test") return ds.test;
  fail(ErrorKind::InvalidArgument, "unknown split '" + name + "'");
}

// Writes to a file when a path is given, otherwise to the command's stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : path_(path) {
    if (!path.empty()) {
      file_.open(path, std::ios::trunc);
      if (!file_) fail(ErrorKind::Io, "cannot open '" + path + "' for writing");
    }
    stream_ = path.empty() ? &fallback : &file_;
  }
  std::ostream& operator*() { return *stream_; }
  void close() {
    if (path_.empty()) return;
    file_.close();
    if (!file_) fail(ErrorKind::Io, "write failed for '" + path_ + "'");
  }

 private:
  std::string path_;
  std::ofstream file_;
  std::ostream* stream_;
};

void check_frame(const Frame& a, const Frame& b) {
  if (a.names() != b.names()) fail(ErrorKind::Config, "model classes do not match the dataset classes");
}

std::string sample_stem(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05zu", index);
  return buf;
}

// BetP maps, labels and the decision settings they were produced under.
struct EvalContext {
  Frame frame;
  ActList acts;
  double gamma = 0.8;
  std::vector<SegResult> results;
  std::vector<ClassSet> labels;  // soft labels present in the split
  RunConfig config;
  bool has_config = false;
};

EvalContext load_eval(const EvalArgs& a) {
  if (a.model.empty() == a.predictions.empty())
    fail(ErrorKind::InvalidArgument, "give exactly one of --model or --predictions");
  SegDataset ds = load_dataset(a.data);
  const auto& split = split_of(ds, a.split);
  EvalContext ctx{ds.frame, {}, 0.8, {}, ds.soft_labels(split), parse_run_config(kDefaultConfig), false};
  if (!a.config.empty()) {
    ctx.config = load_run_config(a.config);
    ctx.has_config = true;
    check_frame(ctx.config.frame(), ds.frame);
  }

  if (!a.model.empty()) {
    const Model model = load_checkpoint(a.model);
    check_frame(model.frame, ds.frame);
    ctx.acts = model.acts;
    ctx.gamma = model.gamma;
    for (std::size_t i : split) {
      SegResult r;
      r.betp = pignistic_map(model.masses(ds.samples[i].image));
      r.labels = ds.samples[i].labels;
      ctx.results.push_back(std::move(r));
    }
  } else {
    const fs::path dir = a.predictions;
    std::ifstream in(dir / "predictions.json");
    if (!in) fail(ErrorKind::Io, "cannot open '" + (dir / "predictions.json").string() + "'");
    json manifest;
    try {
      manifest = json::parse(in);
      check_frame(Frame(manifest.at("classes").get<std::vector<std::string>>()), ds.frame);
      std::vector<ClassSet> acts;
      for (auto bits : manifest.at("acts").get<std::vector<std::uint64_t>>()) acts.emplace_back(bits);
      ctx.acts = ActList(std::move(acts));
      ctx.gamma = manifest.at("gamma").get<double>();
    } catch (const json::exception& e) {
      fail(ErrorKind::Format, std::string("bad predictions manifest: ") + e.what());
    }
    for (std::size_t i : split) {
      SegResult r;
      r.betp = load_tensor(dir / (sample_stem(i) + ".betp.eftn"));
      r.labels = ds.samples[i].labels;
      if (r.betp.rank() != 3 || r.betp.height() != r.labels.height || r.betp.width() != r.labels.width ||
          r.betp.channels() != ds.frame.size())
        fail(ErrorKind::Dimension, "stored BetP map " + sample_stem(i) + " does not fit its label map");
      ctx.results.push_back(std::move(r));
    }
  }
  if (a.gamma) ctx.gamma = *a.gamma;
  return ctx;
}

std::vector<double> parse_sweep(const std::string& text, const RunConfig& cfg) {
  if (text.empty()) return cfg.gamma_grid();
  double start = 0, step = 0, stop = 0;
  char c1 = 0, c2 = 0;
  std::istringstream in(text);
  if (!(in >> start >> c1 >> step >> c2 >> stop) || c1 != ':' || c2 != ':' || !(in >> std::ws).eof() || !(step > 0))
    fail(ErrorKind::InvalidArgument, "gamma sweep must look like start:step:stop");
  std::vector<double> grid;
  const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
  for (long i = 0; i <= n; ++i) grid.push_back(start + step * static_cast<double>(i));
  for (double g : grid) {
    if (!(g >= 0.5 - 1e-12 && g <= 1.0 + 1e-12)) fail(ErrorKind::InvalidArgument, "gamma sweep leaves [0.5, 1]");
  }
  for (double& g : grid) g = std::clamp(g, 0.5, 1.0);
  return grid;
}

UtilityTable eval_table(const EvalContext& ctx, double gamma) {
  return make_table(ctx.config, ctx.frame, ctx.acts, gamma, ctx.labels);
}

// Every subset of the given size; "singletons", "pairs", "triples", "omega"
// or explicit a+b sets, comma separated.
std::vector<ClassSet> parse_set_list(const Frame& frame, const std::string& text) {
  std::vector<ClassSet> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    std::vector<ClassSet> add;
    if (tok == "singletons") add = subsets_of_size(frame, 1);
    else if (tok == "pairs") add = subsets_of_size(frame, 2);
    else if (tok == "triples") add = subsets_of_size(frame, 3);
    else if (tok == "omega") add = {frame.omega()};
    else add = {parse_class_set(frame, tok)};
    for (ClassSet s : add) {
      if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
    }
  }
  return out;
}

}  // namespace

void cmd_synth(const SynthArgs& a, std::ostream& out) {
  RunConfig cfg = config_or_default(a.config);
  SyntheticConfig sc = cfg.synthetic;
  if (a.seed) sc.seed = *a.seed;
  if (a.boundary_width) sc.boundary_width = *a.boundary_width;
  if (a.unknown) sc.unknown_in_test = true;
  const SegDataset ds = gen_synthetic(cfg.frame(), sc);
  save_dataset(a.out, ds);
  out << "wrote " << ds.samples.size() << " samples to " << a.out << '\n';
}

void cmd_train(const TrainArgs& a, std::ostream& out) {
  RunConfig cfg = config_or_default(a.config);
  if (a.epochs) cfg.training.epochs = *a.epochs;
  if (a.learning_rate) cfg.training.learning_rate = *a.learning_rate;
  const SegDataset ds = load_dataset(a.data);
  const Frame frame = cfg.frame();
  check_frame(frame, ds.frame);
  const auto soft = ds.soft_labels(ds.train);
  const ActList acts = resolve_acts(cfg, frame, soft);
  const UtilityTable table = make_table(cfg, frame, acts, cfg.gamma, soft);
  Model model = Model::create(frame, cfg.architecture, cfg.prototype_count(), acts, cfg.gamma, cfg.seed);

  std::unique_ptr<Sink> history;
  if (!a.history.empty()) {
    history = std::make_unique<Sink>(a.history, out);
    **history << "epoch,loss,pu\n";
  }
  const TrainHistory h = train(model, ds, cfg.training, table, [&](const EpochStats& st) {
    if (history) **history << st.epoch << ',' << num(st.loss) << ',' << num(st.pu) << '\n';
    if (!a.quiet) out << "epoch " << st.epoch << " loss " << num(st.loss) << " pu " << num(st.pu) << '\n';
  });
  if (history) history->close();
  save_checkpoint(a.out, model);
  out << "saved " << a.out << '\n';
}

void cmd_predict(const PredictArgs& a, std::ostream& out) {
  const Model model = load_checkpoint(a.model);
  const SegDataset ds = load_dataset(a.data);
  check_frame(model.frame, ds.frame);
  const auto& split = split_of(ds, a.split);
  RunConfig cfg = config_or_default(a.config);
  if (!a.config.empty()) check_frame(cfg.frame(), ds.frame);
  const double gamma = a.gamma.value_or(model.gamma);
  const UtilityTable table = make_table(cfg, model.frame, model.acts, gamma);

  const fs::path dir = a.out;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create '" + dir.string() + "': " + ec.message());

  json samples = json::array();
  for (std::size_t i : split) {
    const SegResult r = segment(model, ds.samples[i], table);
    const std::string stem = sample_stem(i);
    save_tensor(dir / (stem + ".betp.eftn"), r.betp);
    save_mask(dir / (stem + ".assigned.efmk"), r.assigned, model.frame);
    write_assignment_ppm(dir / (stem + ".ppm"), ds.samples[i].image, r.assigned, r.labels, model.frame);
    samples.push_back({{"index", i}, {"betp", stem + ".betp.eftn"}, {"assigned", stem + ".assigned.efmk"},
                       {"overlay", stem + ".ppm"}});
  }
  std::vector<std::uint64_t> acts;
  for (ClassSet s : model.acts) acts.push_back(s.bits());
  const json manifest{{"classes", model.frame.names()}, {"acts", acts}, {"gamma", gamma}, {"split", a.split},
                      {"samples", samples}};
  std::ofstream m(dir / "predictions.json", std::ios::trunc);
  if (!m) fail(ErrorKind::Io, "cannot write predictions manifest");
  m << manifest.dump(2) << '\n';
  out << "wrote " << split.size() << " predictions to " << dir.string() << '\n';
}

void cmd_evaluate(const EvalArgs& a, std::ostream& out) {
  EvalContext ctx = load_eval(a);
  const std::size_t bins = a.bins.value_or(ctx.config.metrics.bins);
  const std::vector<double> grid = a.sweep ? parse_sweep(*a.sweep, ctx.config) : std::vector<double>{ctx.gamma};

  Sink sink(a.out, out);
  std::ostream& csv = *sink;
  csv << "kind,gamma,q,count,pu,uiou,ece,confidence,utility,unknown_omega_rate,known_omega_rate\n";
  for (double g : grid) {
    const UtilityTable table = eval_table(ctx, g);
    for (auto& r : ctx.results) r.assigned = assign_acts(r.betp, table);
    const double pu = pixel_utility(ctx.results, table);
    const double ui = uiou(ctx.results, table);
    const CalibrationReport cal = calibration(ctx.results, table, bins);
    const NoveltyReport nov = novelty_stats(ctx.results, ctx.frame);
    std::size_t scored = 0;
    for (auto n : cal.bin_counts) scored += n;
    csv << "summary," << num(g) << ",," << scored << ',' << num(pu) << ',' << num(ui) << ',' << num(cal.ece) << ",,,";
    if (nov.unknown_pixels) csv << num(nov.unknown_omega_rate);
    csv << ',' << num(nov.known_omega_rate) << '\n';
    for (std::size_t q = 0; q < bins; ++q) {
      csv << "bin," << num(g) << ',' << q + 1 << ',' << cal.bin_counts[q] << ",,,," << num(cal.bin_confidence[q]) << ','
          << num(cal.bin_utility[q]) << ",,\n";
    }
  }
  sink.close();
}

void cmd_calibrate(const EvalArgs& a, std::ostream& out) {
  EvalContext ctx = load_eval(a);
  const std::size_t bins = a.bins.value_or(ctx.config.metrics.bins);
  const UtilityTable table = eval_table(ctx, ctx.gamma);
  for (auto& r : ctx.results) r.assigned = assign_acts(r.betp, table);
  const CalibrationReport cal = calibration(ctx.results, table, bins);

  Sink sink(a.out, out);
  std::ostream& csv = *sink;
  csv << "q,lower,upper,count,confidence,utility,gap\n";
  for (std::size_t q = 0; q < bins; ++q) {
    const double lo = static_cast<double>(q) / static_cast<double>(bins);
    const double hi = static_cast<double>(q + 1) / static_cast<double>(bins);
    const double gap = cal.bin_counts[q] ? std::abs(cal.bin_confidence[q] - cal.bin_utility[q]) : 0.0;
    csv << q + 1 << ',' << num(lo) << ',' << num(hi) << ',' << cal.bin_counts[q] << ',' << num(cal.bin_confidence[q])
        << ',' << num(cal.bin_utility[q]) << ',' << num(gap) << '\n';
  }
  sink.close();
  if (!a.out.empty()) out << "ece " << num(cal.ece) << '\n';
}

void cmd_owa(const OwaArgs& a, std::ostream& out) {
  if (a.m < 2 || a.m > 16) fail(ErrorKind::InvalidArgument, "--m must lie in [2, 16]");
  std::vector<std::string> names;
  if (a.names.empty()) {
    for (std::size_t j = 1; j <= a.m; ++j) names.push_back("w" + std::to_string(j));
  } else {
    std::stringstream ss(a.names);
    for (std::string n; std::getline(ss, n, ',');) names.push_back(n);
    if (names.size() != a.m) fail(ErrorKind::InvalidArgument, "--names must list exactly --m names");
  }
  const Frame frame(names);
  const auto act_sets = parse_set_list(frame, a.acts);
  if (act_sets.empty()) fail(ErrorKind::InvalidArgument, "--acts selects no sets");
  const OwaWeights owa = OwaWeights::solve(a.gamma, a.m);
  const Matrix base = Matrix::identity(a.m);
  const ActList acts(act_sets);

  out << "table,row";
  for (std::size_t i = 1; i <= a.m; ++i) out << ",g" << i;
  out << '\n';
  for (std::size_t k = 1; k <= a.m; ++k) {
    out << "weights," << k;
    const auto g = owa.for_cardinality(k);
    for (std::size_t i = 0; i < a.m; ++i) out << ',' << (i < g.size() ? num(g[i]) : "");
    out << '\n';
  }

  out << "table,act";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  const Matrix ext = extend_utilities(base, acts, owa);
  for (std::size_t r = 0; r < acts.size(); ++r) {
    out << "extended," << format_class_set(frame, acts[r]);
    for (std::size_t j = 0; j < a.m; ++j) out << ',' << num(ext(r, j));
    out << '\n';
  }

  if (!a.soft_labels.empty()) {
    const auto labels = parse_set_list(frame, a.soft_labels);
    const UtilityTable table(base, acts, a.gamma, labels);
    out << "table,act";
    for (const auto& n : names) out << ',' << n;
    for (ClassSet l : labels) out << ',' << format_class_set(frame, l);
    out << '\n';
    for (ClassSet act : acts) {
      out << "soft," << format_class_set(frame, act);
      for (std::size_t j = 0; j < a.m; ++j) out << ',' << num(table.utility(act, ClassSet::singleton(j)));
      for (ClassSet l : labels) out << ',' << num(table.utility(act, l));
      out << '\n';
    }
  }
}

void cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  RunConfig cfg = config_or_default(a.config);
  Frame frame = cfg.frame();
  Model model = [&] {
    if (!a.model.empty()) return load_checkpoint(a.model);
    Architecture arch = cfg.architecture;
    return Model::create(frame, arch, cfg.prototype_count(), ActList{}, cfg.gamma, cfg.seed);
  }();
  frame = model.frame;
  if (infer_shapes(model.backbone.architecture(), a.size, a.size).back().height != a.size)
    fail(ErrorKind::Config, "architecture does not map a " + std::to_string(a.size) + "x" + std::to_string(a.size) +
                                " image to full resolution");

  SyntheticConfig sc;
  sc.train = 1;
  sc.test = 0;
  sc.height = sc.width = a.size;
  sc.seed = a.seed;
  sc.min_shape = std::max<std::size_t>(2, a.size / 4);
  sc.max_shape = std::max(sc.min_shape, a.size / 2);
  const SegDataset ds = gen_synthetic(frame, sc);
  const auto soft = ds.soft_labels(ds.train);
  if (model.acts.size() == 0) model.acts = build_act_list(frame, soft);
  const UtilityTable table = make_table(cfg, frame, model.acts, model.gamma, soft);

  GradCheckOptions opt;
  opt.parameters = a.parameters;
  opt.seed = a.seed;
  opt.step = a.step;
  const GradCheckReport rep = grad_check(model, ds.samples[0], table, opt);
  out << "checked,skipped_kinks,max_rel_error,max_abs_error\n";
  out << rep.checked << ',' << rep.skipped_kinks << ',' << num(rep.max_rel_error) << ',' << num(rep.max_abs_error)
      << "\n\nparameter,analytic,numeric,rel_error\n";
  for (const auto& e : rep.entries)
    out << e.parameter << ',' << num(e.analytic) << ',' << num(e.numeric) << ',' << num(e.rel_error) << '\n';
}

}  // namespace efcn::cli
