// One PASS/FAIL line per acceptance criterion; exit status is the number of
// failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "efcn/belief.hpp"
#include "efcn/checkpoint.hpp"
#include "efcn/data.hpp"
#include "efcn/metrics.hpp"
#include "efcn/training.hpp"
#include "efcn/utility.hpp"
#include "efcn_cli/cli.hpp"

using namespace efcn;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::map<std::string, std::vector<double>> owa_rows(const std::vector<std::string>& args, const std::string& table) {
  std::ostringstream out, err;
  if (cli::run(args, out, err) != 0) throw std::runtime_error("owa failed: " + err.str());
  std::map<std::string, std::vector<double>> rows;
  std::istringstream in(out.str());
  for (std::string line; std::getline(in, line);) {
    std::stringstream ls(line);
    std::vector<std::string> cells;
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    if (cells.size() < 3 || cells[0] != table) continue;
    for (std::size_t i = 2; i < cells.size(); ++i) rows[cells[1]].push_back(std::stod(cells[i]));
  }
  return rows;
}

void table1() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = owa_rows({"owa", "--gamma", "0.8", "--m", "3", "--acts", "singletons,pairs,omega"}, "extended");
  const double secs = seconds_since(t0);
  double worst = 0;
  for (const char* pair : {"w1+w2", "w1+w3", "w2+w3"}) {
    const auto& r = rows.at(pair);
    for (std::size_t j = 0; j < 3; ++j) {
      const bool member = std::string(pair).find("w" + std::to_string(j + 1)) != std::string::npos;
      worst = std::max(worst, std::abs(r[j] - (member ? 0.8 : 0.0)));
    }
  }
  for (double v : rows.at("Omega")) worst = std::max(worst, std::abs(v - 0.6819));
  report(1, worst <= 1e-3 && secs < 1.0, fmt("max deviation %.2e, Omega %.6f, %.3f s", worst, rows.at("Omega")[0], secs));
}

void table2() {
  const auto rows = owa_rows({"owa", "--gamma", "0.8", "--m", "3", "--soft-labels", "pairs,omega"}, "soft");
  // Columns: w1 w2 w3 w1+w2 w1+w3 w2+w3 Omega.
  const std::vector<std::tuple<const char*, int, double>> cells{
      {"w1", 3, 0.625}, {"w1", 6, 0.489}, {"w1+w2", 6, 0.782}, {"Omega", 3, 0.853}, {"w1+w2", 4, 0.5}};
  double worst = 0;
  std::string got;
  for (const auto& [act, col, want] : cells) {
    const double v = rows.at(act)[static_cast<std::size_t>(col)];
    worst = std::max(worst, std::abs(v - want));
    got += fmt("%.4f ", v);
  }
  report(2, worst <= 1e-3, fmt("cells %smax deviation %.2e", got.c_str(), worst));
}

void owa_limits() {
  double worst = 0;
  for (std::size_t k = 2; k <= 8; ++k) {
    for (double gamma : {0.5, 1.0}) {
      const auto g = solve_owa(gamma, k);
      for (std::size_t i = 0; i < k; ++i) {
        const double want = gamma == 1.0 ? (i == 0 ? 1.0 : 0.0) : 1.0 / static_cast<double>(k);
        worst = std::max(worst, std::abs(g[i] - want));
      }
      worst = std::max(worst, std::abs(tolerance_to_imprecision(g) - gamma));
      worst = std::max(worst, std::abs(std::accumulate(g.begin(), g.end(), 0.0) - 1.0));
    }
  }
  report(3, worst < 1e-9, fmt("max residual %.2e over k = 2..8", worst));
}

MassVector random_mass(std::mt19937_64& rng, std::size_t m) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MassVector r{std::vector<double>(m), u(rng)};
  double total = r.omega;
  for (double& v : r.singletons) total += (v = u(rng));
  for (double& v : r.singletons) v /= total;
  r.omega /= total;
  return r;
}

void dempster() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(4);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t m = 2 + static_cast<std::size_t>(i) % 7;
    const MassVector a = random_mass(rng, m), b = random_mass(rng, m);
    const MassVector fast = normalize(combine_simple(a, b));
    const GeneralMass ref = dempster_oracle(to_general(a), to_general(b));
    for (std::size_t j = 0; j < m; ++j) {
      const auto it = ref.find(ClassSet::singleton(j));
      worst = std::max(worst, std::abs(fast.singletons[j] - (it == ref.end() ? 0.0 : it->second)));
    }
    worst = std::max(worst, std::abs(fast.omega - ref.at(ClassSet::full(m))));
  }
  const double secs = seconds_since(t0);
  report(4, worst < 1e-9 && secs < 10.0, fmt("1000 pairs, max deviation %.2e, %.3f s", worst, secs));
}

void gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  double loss_worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 2 + static_cast<std::size_t>(trial) % 6;
    const Frame f = [&] {
      std::vector<std::string> names;
      for (std::size_t j = 0; j < m; ++j) names.push_back("c" + std::to_string(j));
      return Frame(names);
    }();
    const std::vector<ClassSet> labels{ClassSet::singleton(0) | ClassSet::singleton(1)};
    const UtilityTable t = UtilityTable::identity(f, build_act_list(f, labels), 0.5 + 0.5 * u(rng), labels);
    const SoftTarget target = make_soft_target(trial % 2 ? labels[0] : ClassSet::singleton(trial % m), t);
    MassVector mv = random_mass(rng, m);
    const auto g = loss_grad_masses(mv, target, t);
    for (std::size_t k = 0; k < m; ++k) {
      const double h = 1e-4;
      MassVector up = mv, dn = mv;
      up.singletons[k] += h;
      up.omega -= h;
      dn.singletons[k] -= h;
      dn.omega += h;
      const double num = (loss(up, target, t) - loss(dn, target, t)) / (2 * h);
      loss_worst = std::max(loss_worst, std::abs(num - g[k]) / std::max({std::abs(num), std::abs(g[k]), 1e-6}));
    }
  }

  const Frame f({"background", "class1", "class2"});
  const std::vector<ClassSet> soft{ClassSet::singleton(0) | ClassSet::singleton(1)};
  const ActList acts = build_act_list(f, soft);
  const UtilityTable t = UtilityTable::identity(f, acts, 0.8, soft);
  Model model = Model::create(f, Architecture::toy(), 15, acts, 0.8, 7);
  std::normal_distribution<double> n(0.5, 0.3);
  SegSample sample{Tensor::hwc(8, 8, 3), LabelMap(8, 8)};
  for (double& v : sample.image.storage()) v = n(rng);
  for (std::size_t i = 0; i < sample.labels.size(); ++i)
    sample.labels.cells[i] = i % 7 == 0 ? soft[0] : ClassSet::singleton(rng() % 3);
  const GradCheckReport r = grad_check(model, sample, t);
  const double secs = seconds_since(t0);
  report(5, loss_worst < 1e-6 && r.max_rel_error < 1e-4 && secs < 60.0,
         fmt("loss-gradient rel %.2e; full graph rel %.2e over %zu parameters (%zu kinks skipped); %.2f s", loss_worst,
             r.max_rel_error, r.checked, r.skipped_kinks, secs));
}

void adjointness() {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<std::size_t> small(1, 4);
  std::normal_distribution<double> n(0.0, 1.0);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    ConvSpec s;
    s.kernel_h = small(rng);
    s.kernel_w = small(rng);
    s.depth = small(rng);
    s.filters = small(rng);
    s.stride = small(rng);
    s.kernel.resize(s.kernel_size());
    for (double& v : s.kernel) v = n(rng);
    const std::size_t oh = small(rng), ow = small(rng);
    Tensor x = Tensor::hwc((oh - 1) * s.stride + s.kernel_h, (ow - 1) * s.stride + s.kernel_w, s.depth);
    Tensor y = Tensor::hwc(oh, ow, s.filters);
    for (double& v : x.storage()) v = n(rng);
    for (double& v : y.storage()) v = n(rng);
    const double lhs = dot(conv2d_valid(x, s).data(), y.data());
    const double rhs = dot(x.data(), conv2d_transpose(y, s).data());
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  report(6, worst < 1e-9, fmt("100 shapes, max |<Ax,y> - <x,A'y>| = %.2e", worst));
}

// Shared state for the end-to-end criteria.
struct Experiment {
  Frame frame{{"background", "class1", "class2"}};
  std::optional<SegDataset> soft;   // boundary width 2
  std::optional<SegDataset> hard;   // same images, singleton labels
  std::optional<SegDataset> novel;  // same images plus a held-out class in the test split
  std::vector<ClassSet> soft_labels;
  std::optional<Model> soft_model;
  std::optional<Model> hard_model;
  double train_seconds = 0;
  std::size_t epochs = 0;
};

Model train_model(const SegDataset& ds, double& secs, std::size_t& epochs) {
  const std::vector<ClassSet> labels = ds.soft_labels(ds.train);
  const ActList acts = build_act_list(ds.frame, labels);
  const UtilityTable table = UtilityTable::identity(ds.frame, acts, 0.8, labels);
  Model model = Model::create(ds.frame, Architecture::toy(), 5 * ds.frame.size(), acts, 0.8, 0);
  const TrainConfig cfg;
  epochs = cfg.epochs;
  const auto t0 = std::chrono::steady_clock::now();
  train(model, ds, cfg, table);
  secs = seconds_since(t0);
  return model;
}

std::vector<SegResult> segment_split(const Model& model, const SegDataset& ds, const UtilityTable& table) {
  std::vector<SegResult> out;
  for (std::size_t i : ds.test) out.push_back(segment(model, ds.samples[i], table));
  return out;
}

std::vector<SegResult> with_labels(std::vector<SegResult> rs, const SegDataset& ds) {
  for (std::size_t k = 0; k < rs.size(); ++k) rs[k].labels = ds.samples[ds.test[k]].labels;
  return rs;
}

UtilityTable eval_table(const Experiment& e, double gamma) {
  return UtilityTable::identity(e.frame, build_act_list(e.frame, e.soft_labels), gamma, e.soft_labels);
}

void end_to_end(Experiment& e) {
  SyntheticConfig cfg;  // 400 / 400 images, 32 x 32, seed 0, boundary width 2
  e.soft = gen_synthetic(e.frame, cfg);
  SyntheticConfig hard_cfg = cfg;
  hard_cfg.boundary_width = 0;
  e.hard = gen_synthetic(e.frame, hard_cfg);
  SyntheticConfig novel_cfg = cfg;
  novel_cfg.unknown_in_test = true;
  e.novel = gen_synthetic(e.frame, novel_cfg);
  e.soft_labels = e.soft->soft_labels(e.soft->test);

  e.soft_model = train_model(*e.soft, e.train_seconds, e.epochs);

  // Precise segmentation: at gamma = 0.5 only singletons are ever chosen;
  // scored against the singleton labels of the same test images.
  const UtilityTable precise = UtilityTable::identity(e.frame, build_act_list(e.frame, {}), 0.5);
  const auto rs = with_labels(segment_split(*e.soft_model, *e.soft, precise), *e.hard);
  const double pu = pixel_utility(rs, precise);
  const double pu_soft = pixel_utility(with_labels(rs, *e.soft), eval_table(e, 0.5));
  report(7, pu >= 0.9 && e.train_seconds < 900 && e.epochs <= 50,
         fmt("test PU %.4f (soft-label PU %.4f), %zu epochs in %.1f s", pu, pu_soft, e.epochs, e.train_seconds));
}

void gamma_sweep(const Experiment& e) {
  const auto base = segment_split(*e.soft_model, *e.soft, eval_table(e, 0.8));
  std::vector<double> grid, curve;
  std::string text;
  for (int i = 0; i <= 10; ++i) {
    const double gamma = 0.5 + 0.05 * i;
    const UtilityTable t = eval_table(e, gamma);
    std::vector<SegResult> rs;
    for (const auto& r : base) rs.push_back(reassign(r, t));
    grid.push_back(gamma);
    curve.push_back(uiou(rs, t));
    text += fmt("%.2f:%.4f ", gamma, curve.back());
  }
  const double interior = *std::max_element(curve.begin() + 1, curve.end() - 1);
  const bool ok = interior > curve.front() && interior > curve.back();
  report(8, ok, "UIoU " + text);
}

void novelty(const Experiment& e) {
  std::vector<SegResult> base;
  const UtilityTable t8 = eval_table(e, 0.8);
  for (std::size_t i : e.novel->test) base.push_back(segment(*e.soft_model, e.novel->samples[i], t8));
  const NoveltyReport at8 = novelty_stats(base, e.frame);
  const UtilityTable t5 = eval_table(e, 0.5);
  std::vector<SegResult> half;
  for (const auto& r : base) half.push_back(reassign(r, t5));
  const NoveltyReport at5 = novelty_stats(half, e.frame);
  const bool ok = at8.unknown_omega_rate >= 2.0 * at8.known_omega_rate && at8.unknown_omega_rate > 0.0 &&
                  at5.unknown_omega_rate == 0.0 && at5.known_omega_rate == 0.0;
  std::string top = "none";
  if (!at8.unknown_assignments.empty())
    top = e.frame.format(at8.unknown_assignments[0].first) + fmt(" %.4f", at8.unknown_assignments[0].second);
  report(9, ok,
         fmt("gamma 0.8: unknown %.4f vs known %.4f; gamma 0.5: unknown %.4f, known %.4f; unknown pixels mostly %s",
             at8.unknown_omega_rate, at8.known_omega_rate, at5.unknown_omega_rate, at5.known_omega_rate, top.c_str()));
}

void calibration_check(Experiment& e) {
  std::vector<double> co(10), au(10);
  for (int i = 0; i < 10; ++i) {
    co[i] = i < 4 ? 0.4 : 0.9;
    au[i] = i < 4 ? 0.3 : 0.85;
  }
  const double hand = calibration_from_pairs(co, au, 2).ece;

  double secs = 0;
  std::size_t epochs = 0;
  e.hard_model = train_model(*e.hard, secs, epochs);
  const UtilityTable t = eval_table(e, 0.8);
  const double ece_soft = calibration(segment_split(*e.soft_model, *e.soft, t), t).ece;
  const double ece_hard = calibration(segment_split(*e.hard_model, *e.soft, t), t).ece;
  report(10, std::abs(hand - 0.07) < 1e-12 && ece_soft <= ece_hard,
         fmt("hand case ECE %.15g; gamma 0.8 test ECE with soft labels %.4f, without %.4f", hand, ece_soft, ece_hard));
}

void round_trips() {
  const fs::path dir = fs::temp_directory_path() / ("efcn_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> dim(1, 9);
  std::uniform_int_distribution<std::uint64_t> any;
  std::size_t bad = 0;
  for (int i = 0; i < 1000; ++i) {
    // Tensor: random rank 3 or 4, arbitrary bit patterns (NaNs excluded so
    // equality is meaningful; signed zeros and subnormals kept).
    std::vector<std::size_t> dims{dim(rng), dim(rng), dim(rng)};
    if (i % 2) dims.insert(dims.begin(), dim(rng));
    Tensor t(dims);
    for (double& v : t.storage()) {
      do v = std::bit_cast<double>(any(rng));
      while (std::isnan(v));
    }
    save_tensor(dir / "t.eftn", t);
    const Tensor tb = load_tensor(dir / "t.eftn");
    bad += tb.dims() != t.dims() || std::memcmp(tb.data().data(), t.data().data(), t.size() * sizeof(double)) != 0;

    const std::size_t m = 2 + i % 63;
    std::vector<std::string> names;
    for (std::size_t j = 0; j < m; ++j) names.push_back("c" + std::to_string(j));
    const Frame f(names);
    LabelMap mask(dim(rng), dim(rng));
    for (auto& c : mask.cells) c = ClassSet(any(rng)) & f.omega();
    save_mask(dir / "m.efmk", mask, f);
    bad += !(load_mask(dir / "m.efmk", f) == mask);

    const std::size_t mm = 2 + i % 4;
    const Frame mf([&] {
      std::vector<std::string> n;
      for (std::size_t j = 0; j < mm; ++j) n.push_back("k" + std::to_string(j));
      return n;
    }());
    const ActList acts = build_act_list(mf, i % 3 ? subsets_of_size(mf, 2) : std::vector<ClassSet>{});
    const Architecture arch = i % 2 ? Architecture::toy(3, 1 + i % 6) : Architecture::toy_skip(1 + i % 3, 2 + i % 5);
    const Model model = Model::create(mf, arch, 1 + i % 7, acts, 0.5 + 0.0005 * i, any(rng));
    save_checkpoint(dir / "c.efcn", model);
    const Model back = load_checkpoint(dir / "c.efcn");
    bool same = back.frame == model.frame && back.acts == model.acts && back.gamma == model.gamma &&
                back.backbone.architecture() == model.backbone.architecture();
    const auto va = model.parameter_views(), vb = back.parameter_views();
    same = same && va.size() == vb.size();
    for (std::size_t k = 0; same && k < va.size(); ++k)
      same = va[k].size() == vb[k].size() && std::memcmp(va[k].data(), vb[k].data(), va[k].size() * sizeof(double)) == 0;
    bad += !same;
  }
  fs::remove_all(dir);
  report(11, bad == 0, fmt("1000 tensor, mask and checkpoint round trips, %zu mismatches", bad));
}

void guarded(int id, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& ex) {
    report(id, false, std::string("threw: ") + ex.what());
  }
}

}  // namespace

int main() {
  guarded(1, table1);
  guarded(2, table2);
  guarded(3, owa_limits);
  guarded(4, dempster);
  guarded(5, gradients);
  guarded(6, adjointness);
  Experiment e;
  guarded(7, [&] { end_to_end(e); });
  guarded(8, [&] { gamma_sweep(e); });
  guarded(9, [&] { novelty(e); });
  guarded(10, [&] { calibration_check(e); });
  guarded(11, round_trips);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
