#include "efcn/checkpoint.hpp"

#include <json.hpp>

#include "efcn/binary_io.hpp"
#include "efcn/config.hpp"
#include "efcn/error.hpp"

namespace efcn {

using nlohmann::json;

namespace {
constexpr std::uint16_t kCheckpointVersion = 1;
constexpr std::size_t kMaxHeader = 1 << 24;
}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  json header;
  header["classes"] = model.frame.names();
  header["architecture"] = json::parse(architecture_to_json(model.backbone.architecture()));
  header["prototypes"] = model.bank.count;
  header["features"] = model.bank.features;
  std::vector<std::uint64_t> acts;
  for (ClassSet a : model.acts) acts.push_back(a.bits());
  header["acts"] = acts;
  header["gamma"] = model.gamma;
  const std::string text = header.dump();

  io::Writer w;
  w.bytes("EFCN");
  w.uint<std::uint16_t>(kCheckpointVersion);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(text.size()));
  w.bytes(text);
  const auto arrays = model.parameter_views();
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(arrays.size()));
  for (const auto& a : arrays) {
    w.uint<std::uint64_t>(a.size());
    for (double v : a) w.f64(v);
  }
  w.write_to(path);
}

Model load_checkpoint(const std::filesystem::path& path) {
  io::Reader r = io::Reader::open(path);
  if (r.bytes(4) != "EFCN") fail(ErrorKind::Format, "'" + path.string() + "': not a model checkpoint");
  const auto version = r.uint<std::uint16_t>();
  if (version != kCheckpointVersion)
    fail(ErrorKind::Format, "'" + path.string() + "': unsupported checkpoint version " + std::to_string(version));
  const auto header_len = r.uint<std::uint32_t>();
  if (header_len > kMaxHeader || header_len > r.remaining())
    fail(ErrorKind::Format, "'" + path.string() + "': truncated file");

  Model model{Frame({"a", "b"}), {}, {}, {}, 0.8};
  std::size_t prototypes = 0;
  std::size_t features = 0;
  Architecture arch;
  try {
    const json header = json::parse(r.bytes(header_len));
    model.frame = Frame(header.at("classes").get<std::vector<std::string>>());
    arch = architecture_from_json(header.at("architecture").dump());
    prototypes = header.at("prototypes").get<std::size_t>();
    features = header.at("features").get<std::size_t>();
    std::vector<ClassSet> acts;
    for (auto bits : header.at("acts").get<std::vector<std::uint64_t>>()) acts.emplace_back(bits);
    model.acts = ActList(std::move(acts));
    model.gamma = header.at("gamma").get<double>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, "'" + path.string() + "': bad checkpoint header: " + e.what());
  } catch (const Error& e) {
    fail(ErrorKind::Format, "'" + path.string() + "': bad checkpoint header: " + e.what());
  }
  if (features != arch.feature_channels())
    fail(ErrorKind::Format, "'" + path.string() + "': prototype width does not match the architecture");
  for (ClassSet a : model.acts) {
    if (a.empty() || !model.frame.within(a)) fail(ErrorKind::Format, "'" + path.string() + "': act outside the frame");
  }

  // Allocate with the right shapes, then overwrite every array.
  std::mt19937_64 rng(0);
  model.backbone = Backbone::random(arch, rng);
  model.bank = PrototypeBank::zeros(prototypes, features, model.frame.size());
  auto arrays = model.parameter_views();
  const auto count = r.uint<std::uint32_t>();
  if (count != arrays.size()) fail(ErrorKind::Format, "'" + path.string() + "': wrong number of parameter arrays");
  for (auto& a : arrays) {
    const auto n = r.uint<std::uint64_t>();
    if (n != a.size()) fail(ErrorKind::Format, "'" + path.string() + "': parameter array has the wrong length");
    for (double& v : a) v = r.f64();
  }
  r.expect_end();
  return model;
}

}  // namespace efcn
