#include "efcn/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "efcn/binary_io.hpp"
#include "efcn/error.hpp"

namespace efcn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint16_t kTensorVersion = 1;
constexpr std::uint16_t kMaskVersion = 1;
constexpr std::size_t kPaletteSize = 9;

const double kPalette[kPaletteSize][3] = {
    {0.15, 0.15, 0.15},  // background
    {0.85, 0.20, 0.20},
    {0.20, 0.35, 0.85},
    {0.20, 0.80, 0.30},
    {0.90, 0.85, 0.20},
    {0.70, 0.30, 0.80},
    {0.20, 0.80, 0.80},
    {0.95, 0.55, 0.15},
    {0.95, 0.95, 0.95},
};

// Hard class index per pixel; kUnknown marks the held-out class.
constexpr std::size_t kUnknown = static_cast<std::size_t>(-1);

struct ShapeDraw {
  bool disc;
  std::size_t cls;
  std::size_t h, w;    // bounding box size
  std::size_t y0, x0;  // top-left
};

ShapeDraw draw_shape(std::mt19937_64& rng, const SyntheticConfig& cfg, std::size_t cls) {
  std::uniform_int_distribution<std::size_t> size(cfg.min_shape, cfg.max_shape);
  std::bernoulli_distribution coin(0.5);
  ShapeDraw s{};
  s.cls = cls;
  s.disc = coin(rng);
  s.h = size(rng);
  s.w = s.disc ? s.h : size(rng);
  s.y0 = std::uniform_int_distribution<std::size_t>(0, cfg.height - s.h)(rng);
  s.x0 = std::uniform_int_distribution<std::size_t>(0, cfg.width - s.w)(rng);
  return s;
}

void paint(std::vector<std::size_t>& classes, std::size_t width, const ShapeDraw& s) {
  const double cy = static_cast<double>(s.y0) + static_cast<double>(s.h) / 2.0;
  const double cx = static_cast<double>(s.x0) + static_cast<double>(s.w) / 2.0;
  const double r = static_cast<double>(s.h) / 2.0;
  for (std::size_t y = s.y0; y < s.y0 + s.h; ++y) {
    for (std::size_t x = s.x0; x < s.x0 + s.w; ++x) {
      if (s.disc) {
        const double dy = static_cast<double>(y) + 0.5 - cy;
        const double dx = static_cast<double>(x) + 0.5 - cx;
        if (dy * dy + dx * dx > r * r) continue;
      }
      classes[y * width + x] = s.cls;
    }
  }
}

// Separable Gaussian blur of an H x W x 3 image with edge clamping.
void blur(std::vector<double>& img, std::size_t h, std::size_t w, double sigma) {
  if (sigma <= 0.0) return;
  const long r = static_cast<long>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0.0;
  for (long i = -r; i <= r; ++i) sum += k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
  for (double& v : k) v /= sum;
  std::vector<double> tmp(img.size());
  auto pass = [&](const std::vector<double>& src, std::vector<double>& dst, bool horizontal) {
    for (long y = 0; y < static_cast<long>(h); ++y) {
      for (long x = 0; x < static_cast<long>(w); ++x) {
        for (std::size_t c = 0; c < 3; ++c) {
          double acc = 0.0;
          for (long i = -r; i <= r; ++i) {
            const long yy = horizontal ? y : std::clamp(y + i, 0L, static_cast<long>(h) - 1);
            const long xx = horizontal ? std::clamp(x + i, 0L, static_cast<long>(w) - 1) : x;
            acc += k[static_cast<std::size_t>(i + r)] * src[(static_cast<std::size_t>(yy) * w + static_cast<std::size_t>(xx)) * 3 + c];
          }
          dst[(static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)) * 3 + c] = acc;
        }
      }
    }
  };
  pass(img, tmp, true);
  pass(tmp, img, false);
}

}  // namespace

std::vector<double> palette_colour(std::size_t k) {
  if (k >= kPaletteSize) fail(ErrorKind::Config, "palette has only 9 colours");
  return {kPalette[k][0], kPalette[k][1], kPalette[k][2]};
}

std::vector<ClassSet> SegDataset::soft_labels(const std::vector<std::size_t>& split) const {
  std::set<ClassSet, CardinalityOrder> found;
  for (std::size_t idx : split) {
    for (ClassSet c : samples.at(idx).labels.cells) {
      if (c.size() > 1) found.insert(c);
    }
  }
  return {found.begin(), found.end()};
}

void SegDataset::validate() const {
  std::vector<int> owner(samples.size(), 0);
  for (const auto* split : {&train, &val, &test}) {
    for (std::size_t i : *split) {
      if (i >= samples.size()) fail(ErrorKind::Format, "split index out of range");
      if (owner[i]++) fail(ErrorKind::Format, "sample " + std::to_string(i) + " appears in more than one split");
    }
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!owner[i]) fail(ErrorKind::Format, "sample " + std::to_string(i) + " belongs to no split");
    const auto& s = samples[i];
    if (s.image.rank() != 3 || s.image.height() != s.labels.height || s.image.width() != s.labels.width)
      fail(ErrorKind::Format, "sample " + std::to_string(i) + ": image and labels differ in size");
    if (s.image.channels() != samples[0].image.channels())
      fail(ErrorKind::Format, "sample " + std::to_string(i) + ": channel count differs from sample 0");
    for (ClassSet c : s.labels.cells) {
      if (!frame.within(c)) fail(ErrorKind::Format, "sample " + std::to_string(i) + ": label outside the frame");
      if (c.empty() && !unknown_class)
        fail(ErrorKind::Format, "sample " + std::to_string(i) + ": unknown-class pixel without an unknown class");
    }
  }
}

LabelMap soften_labels(const LabelMap& hard, std::size_t boundary_width) {
  LabelMap out = hard;
  if (boundary_width == 0) return out;
  const long r = static_cast<long>((boundary_width + 1) / 2);
  const long h = static_cast<long>(hard.height);
  const long w = static_cast<long>(hard.width);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      const ClassSet own = hard.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
      if (own.empty()) continue;
      ClassSet seen = own;
      for (long dy = -r; dy <= r; ++dy) {
        for (long dx = -r; dx <= r; ++dx) {
          const long yy = y + dy;
          const long xx = x + dx;
          if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
          seen = seen | hard.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
        }
      }
      out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = seen;
    }
  }
  return out;
}

SegDataset gen_synthetic(const Frame& frame, const SyntheticConfig& cfg) {
  const std::size_t m = frame.size();
  if (m > 8) fail(ErrorKind::Config, "synthetic palette supports at most 8 classes");
  if (cfg.unknown_in_test && m + 1 > kPaletteSize) fail(ErrorKind::Config, "no palette colour left for the unknown class");
  if (cfg.height == 0 || cfg.width == 0) fail(ErrorKind::Config, "image size must be positive");
  if (cfg.min_shape == 0 || cfg.min_shape > cfg.max_shape) fail(ErrorKind::Config, "shape size range is empty");
  if (cfg.max_shape > cfg.height || cfg.max_shape > cfg.width)
    fail(ErrorKind::Config, "shapes up to " + std::to_string(cfg.max_shape) + " px do not fit in " +
                                std::to_string(cfg.height) + "x" + std::to_string(cfg.width) + " images");
  if (cfg.max_shapes == 0) fail(ErrorKind::Config, "max_shapes must be positive");
  if (cfg.noise < 0.0) fail(ErrorKind::Config, "noise must be non-negative");
  if (!(cfg.edge_blur >= 0.0)) fail(ErrorKind::Config, "edge_blur must be non-negative");
  const std::size_t count = cfg.train + cfg.val + cfg.test;
  if (count == 0) fail(ErrorKind::Config, "dataset must contain at least one image");

  SegDataset ds{frame, {}, {}, {}, {}, std::nullopt};
  if (cfg.unknown_in_test) ds.unknown_class = "unknown";
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const std::size_t hw = cfg.height * cfg.width;
  const std::size_t max_shapes = std::min(cfg.max_shapes, m - 1);

  ds.samples.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    const bool is_test = n >= cfg.train + cfg.val;
    std::vector<std::size_t> classes(hw, 0);

    std::vector<std::size_t> pool(m - 1);
    for (std::size_t k = 0; k < pool.size(); ++k) pool[k] = k + 1;
    std::shuffle(pool.begin(), pool.end(), rng);
    const std::size_t shapes = std::uniform_int_distribution<std::size_t>(1, max_shapes)(rng);
    for (std::size_t k = 0; k < shapes; ++k) paint(classes, cfg.width, draw_shape(rng, cfg, pool[k]));
    if (cfg.unknown_in_test && is_test) paint(classes, cfg.width, draw_shape(rng, cfg, kUnknown));

    SegSample sample{Tensor::hwc(cfg.height, cfg.width, 3), LabelMap(cfg.height, cfg.width)};
    std::vector<double>& img = sample.image.storage();
    for (std::size_t p = 0; p < hw; ++p) {
      const std::size_t cls = classes[p];
      const double* colour = kPalette[cls == kUnknown ? m : cls];
      for (std::size_t c = 0; c < 3; ++c) img[p * 3 + c] = colour[c];
      sample.labels.cells[p] = cls == kUnknown ? ClassSet{} : ClassSet::singleton(cls);
    }
    blur(img, cfg.height, cfg.width, cfg.edge_blur);
    for (double& v : img) v += cfg.noise * noise(rng);
    sample.labels = soften_labels(sample.labels, cfg.boundary_width);
    ds.samples.push_back(std::move(sample));

    if (n < cfg.train)
      ds.train.push_back(n);
    else if (n < cfg.train + cfg.val)
      ds.val.push_back(n);
    else
      ds.test.push_back(n);
  }
  return ds;
}

void save_tensor(const fs::path& path, const Tensor& t, bool as_float32) {
  if (t.rank() == 0 || t.rank() > 255) fail(ErrorKind::Dimension, "tensor rank out of range");
  io::Writer w;
  w.bytes("EFTN");
  w.uint<std::uint16_t>(kTensorVersion);
  w.uint<std::uint8_t>(as_float32 ? 0 : 1);
  w.uint<std::uint8_t>(static_cast<std::uint8_t>(t.rank()));
  for (std::size_t d : t.dims()) {
    if (d > 0xFFFFFFFFu) fail(ErrorKind::Dimension, "tensor dimension exceeds 32 bits");
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(d));
  }
  for (double v : t.data()) {
    if (as_float32)
      w.f32(static_cast<float>(v));
    else
      w.f64(v);
  }
  w.write_to(path);
}

Tensor load_tensor(const fs::path& path) {
  auto r = io::Reader::open(path);
  if (r.bytes(4) != "EFTN") fail(ErrorKind::Format, "'" + path.string() + "': not a tensor file (bad magic)");
  const auto version = r.uint<std::uint16_t>();
  if (version != kTensorVersion) fail(ErrorKind::Format, "'" + path.string() + "': unsupported tensor version " + std::to_string(version));
  const auto dtype = r.uint<std::uint8_t>();
  if (dtype > 1) fail(ErrorKind::Format, "'" + path.string() + "': unknown dtype " + std::to_string(dtype));
  const auto rank = r.uint<std::uint8_t>();
  if (rank == 0) fail(ErrorKind::Format, "'" + path.string() + "': zero rank");
  std::vector<std::size_t> dims(rank);
  std::size_t count = 1;
  for (auto& d : dims) {
    d = r.uint<std::uint32_t>();
    if (d == 0) fail(ErrorKind::Format, "'" + path.string() + "': zero dimension");
    count *= d;
  }
  const std::size_t width = dtype == 0 ? 4 : 8;
  if (r.remaining() != count * width) fail(ErrorKind::Format, "'" + path.string() + "': payload size does not match dims");
  std::vector<double> data(count);
  for (auto& v : data) v = dtype == 0 ? static_cast<double>(r.f32()) : r.f64();
  return Tensor(std::move(dims), std::move(data));
}

void save_mask(const fs::path& path, const LabelMap& labels, const Frame& frame) {
  io::Writer w;
  w.bytes("EFMK");
  w.uint<std::uint16_t>(kMaskVersion);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(labels.height));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(labels.width));
  w.uint<std::uint16_t>(static_cast<std::uint16_t>(frame.size()));
  for (ClassSet c : labels.cells) {
    if (!frame.within(c)) fail(ErrorKind::InvalidLabel, "mask label outside the frame");
    w.uint<std::uint64_t>(c.bits());
  }
  w.write_to(path);
}

LabelMap load_mask(const fs::path& path, const Frame& frame) {
  auto r = io::Reader::open(path);
  if (r.bytes(4) != "EFMK") fail(ErrorKind::Format, "'" + path.string() + "': not a mask file (bad magic)");
  const auto version = r.uint<std::uint16_t>();
  if (version != kMaskVersion) fail(ErrorKind::Format, "'" + path.string() + "': unsupported mask version " + std::to_string(version));
  const std::size_t h = r.uint<std::uint32_t>();
  const std::size_t w = r.uint<std::uint32_t>();
  const std::size_t m = r.uint<std::uint16_t>();
  if (m != frame.size())
    fail(ErrorKind::Format, "'" + path.string() + "': mask has " + std::to_string(m) + " classes, frame has " + std::to_string(frame.size()));
  if (h == 0 || w == 0) fail(ErrorKind::Format, "'" + path.string() + "': empty mask");
  if (r.remaining() != h * w * 8) fail(ErrorKind::Format, "'" + path.string() + "': payload size does not match H x W");
  LabelMap labels(h, w);
  for (auto& c : labels.cells) {
    c = ClassSet(r.uint<std::uint64_t>());
    if (!frame.within(c)) fail(ErrorKind::Format, "'" + path.string() + "': bit set beyond class count");
  }
  return labels;
}

namespace {

std::string sample_stem(std::size_t i) {
  std::ostringstream s;
  s << std::setw(5) << std::setfill('0') << i;
  return s.str();
}

}  // namespace

void save_dataset(const fs::path& dir, const SegDataset& ds) {
  ds.validate();
  std::error_code ec;
  fs::create_directories(dir / "images", ec);
  fs::create_directories(dir / "labels", ec);
  if (ec) fail(ErrorKind::Io, "cannot create dataset directory '" + dir.string() + "'");
  std::vector<const char*> split(ds.samples.size(), "train");
  for (std::size_t i : ds.val) split[i] = "val";
  for (std::size_t i : ds.test) split[i] = "test";
  json manifest;
  manifest["format"] = "efcn-dataset";
  manifest["version"] = 1;
  manifest["classes"] = ds.frame.names();
  manifest["unknown_class"] = ds.unknown_class ? json(*ds.unknown_class) : json(nullptr);
  manifest["samples"] = json::array();
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const std::string stem = sample_stem(i);
    const std::string image = "images/" + stem + ".eftn";
    const std::string labels = "labels/" + stem + ".efmk";
    save_tensor(dir / image, ds.samples[i].image);
    save_mask(dir / labels, ds.samples[i].labels, ds.frame);
    manifest["samples"].push_back({{"image", image}, {"labels", labels}, {"split", split[i]}});
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) fail(ErrorKind::Io, "cannot write manifest in '" + dir.string() + "'");
  out << manifest.dump(2) << '\n';
}

SegDataset load_dataset(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) fail(ErrorKind::Io, "no manifest.json in '" + dir.string() + "'");
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, std::string("dataset manifest: ") + e.what());
  }
  try {
    if (manifest.at("format") != "efcn-dataset" || manifest.at("version") != 1)
      fail(ErrorKind::Format, "dataset manifest has an unsupported format or version");
    SegDataset ds{Frame(manifest.at("classes").get<std::vector<std::string>>()), {}, {}, {}, {}, std::nullopt};
    if (!manifest.at("unknown_class").is_null()) ds.unknown_class = manifest.at("unknown_class").get<std::string>();
    for (const auto& entry : manifest.at("samples")) {
      const std::size_t i = ds.samples.size();
      SegSample s{load_tensor(dir / entry.at("image").get<std::string>()),
                  load_mask(dir / entry.at("labels").get<std::string>(), ds.frame)};
      ds.samples.push_back(std::move(s));
      const std::string split = entry.at("split").get<std::string>();
      if (split == "train")
        ds.train.push_back(i);
      else if (split == "val")
        ds.val.push_back(i);
      else if (split == "test")
        ds.test.push_back(i);
      else
        fail(ErrorKind::Format, "unknown split '" + split + "'");
    }
    ds.validate();
    return ds;
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, std::string("dataset manifest: ") + e.what());
  }
}

}  // namespace efcn
