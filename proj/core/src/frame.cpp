#include "efcn/frame.hpp"

#include <algorithm>
#include <bit>
#include <set>

#include "efcn/error.hpp"

namespace efcn {

std::size_t ClassSet::size() const { return static_cast<std::size_t>(std::popcount(bits_)); }

std::size_t ClassSet::lowest() const { return static_cast<std::size_t>(std::countr_zero(bits_)); }

Frame::Frame(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.size() < 2) fail(ErrorKind::InvalidArgument, "frame needs at least 2 classes");
  if (names_.size() > kMaxClasses)
    fail(ErrorKind::InvalidArgument, "frame supports at most 64 classes, got " + std::to_string(names_.size()));
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) fail(ErrorKind::InvalidArgument, "class names must be non-empty");
    if (!seen.insert(n).second) fail(ErrorKind::InvalidArgument, "duplicate class name '" + n + "'");
  }
}

std::optional<std::size_t> Frame::index_of(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

std::string Frame::format(ClassSet s) const {
  if (s == omega()) return "Omega";
  std::string out = "{";
  bool first = true;
  for (std::size_t j = 0; j < size(); ++j) {
    if (!s.contains(j)) continue;
    if (!first) out += ',';
    out += names_[j];
    first = false;
  }
  return out + "}";
}

std::optional<std::size_t> ActList::index_of(ClassSet s) const {
  auto it = std::find(acts_.begin(), acts_.end(), s);
  if (it == acts_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - acts_.begin());
}

ActList build_act_list(const Frame& frame, std::span<const ClassSet> soft_labels) {
  std::set<ClassSet, CardinalityOrder> extra;
  for (ClassSet label : soft_labels) {
    if (label.empty()) fail(ErrorKind::InvalidLabel, "empty set is not a valid label");
    if (!frame.within(label)) fail(ErrorKind::InvalidLabel, "label has classes outside the frame");
    if (label.size() > 1 && label != frame.omega()) extra.insert(label);
  }
  std::vector<ClassSet> acts;
  acts.reserve(frame.size() + extra.size() + 1);
  for (std::size_t j = 0; j < frame.size(); ++j) acts.push_back(ClassSet::singleton(j));
  acts.insert(acts.end(), extra.begin(), extra.end());
  acts.push_back(frame.omega());
  return ActList(std::move(acts));
}

std::vector<ClassSet> subsets_of_size(const Frame& frame, std::size_t k) {
  std::vector<ClassSet> out;
  const std::uint64_t limit = frame.omega().bits();
  if (k == 0 || k > frame.size()) return out;
  if (k == frame.size()) return {frame.omega()};
  // Gosper's hack walks k-subsets in increasing bit order.
  std::uint64_t v = (std::uint64_t{1} << k) - 1;
  while (v <= limit && v != 0) {
    out.emplace_back(v);
    const std::uint64_t c = v & (~v + 1);
    const std::uint64_t r = v + c;
    if (r == 0) break;
    v = (((r ^ v) >> 2) / c) | r;
  }
  return out;
}

}  // namespace efcn
