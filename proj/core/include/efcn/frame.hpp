#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace efcn {

inline constexpr std::size_t kMaxClasses = 64;

// Subset of the frame as a bit mask; bit j set means class j is in the set.
class ClassSet {
 public:
  constexpr ClassSet() = default;
  constexpr explicit ClassSet(std::uint64_t bits) : bits_(bits) {}

  static constexpr ClassSet singleton(std::size_t j) { return ClassSet(std::uint64_t{1} << j); }
  static constexpr ClassSet full(std::size_t m) {
    return ClassSet(m >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << m) - 1);
  }

  constexpr std::uint64_t bits() const { return bits_; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr bool contains(std::size_t j) const { return (bits_ >> j) & 1U; }
  constexpr bool is_subset_of(ClassSet other) const { return (bits_ & ~other.bits_) == 0; }
  constexpr bool intersects(ClassSet other) const { return (bits_ & other.bits_) != 0; }
  std::size_t size() const;
  // Index of the single member; only meaningful when size() == 1.
  std::size_t lowest() const;

  constexpr ClassSet operator&(ClassSet o) const { return ClassSet(bits_ & o.bits_); }
  constexpr ClassSet operator|(ClassSet o) const { return ClassSet(bits_ | o.bits_); }
  constexpr bool operator==(const ClassSet&) const = default;
  constexpr auto operator<=>(const ClassSet&) const = default;

 private:
  std::uint64_t bits_ = 0;
};

// Ordering used wherever sets are listed: cardinality first, then bit value.
struct CardinalityOrder {
  bool operator()(ClassSet a, ClassSet b) const {
    if (a.size() != b.size()) return a.size() < b.size();
    return a.bits() < b.bits();
  }
};

class Frame {
 public:
  explicit Frame(std::vector<std::string> names);

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t j) const { return names_.at(j); }
  std::optional<std::size_t> index_of(const std::string& name) const;

  ClassSet omega() const { return ClassSet::full(size()); }
  bool within(ClassSet s) const { return s.is_subset_of(omega()); }

  // "{a,b}" using class names, "Omega" for the full frame.
  std::string format(ClassSet s) const;

  bool operator==(const Frame&) const = default;

 private:
  std::vector<std::string> names_;
};

class ActList {
 public:
  ActList() = default;
  explicit ActList(std::vector<ClassSet> acts) : acts_(std::move(acts)) {}

  std::size_t size() const { return acts_.size(); }
  ClassSet operator[](std::size_t i) const { return acts_[i]; }
  const std::vector<ClassSet>& acts() const { return acts_; }
  auto begin() const { return acts_.begin(); }
  auto end() const { return acts_.end(); }
  std::optional<std::size_t> index_of(ClassSet s) const;

  bool operator==(const ActList&) const = default;

 private:
  std::vector<ClassSet> acts_;
};

// Singletons by class index, then the extra labels by cardinality then bit
// value, then Omega. Duplicates (including singletons and Omega among the
// labels) collapse.
ActList build_act_list(const Frame& frame, std::span<const ClassSet> soft_labels);

// Every subset of the frame with exactly k members, in bit-value order.
std::vector<ClassSet> subsets_of_size(const Frame& frame, std::size_t k);

}  // namespace efcn
