#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "topeval/corpus.hpp"

namespace topeval {

enum class CountMode { window, document };

std::string_view to_string(CountMode mode);
CountMode parse_count_mode(std::string_view s);

// Unit-level counts: a unit is a sliding window (window mode) or a whole
// document (document mode). Each type and each unordered pair is counted at
// most once per unit.
class CooccurrenceStats {
 public:
  CooccurrenceStats() = default;
  CooccurrenceStats(CountMode mode, int window_size, std::size_t vocab_size);

  CountMode mode() const { return mode_; }
  int window_size() const { return window_size_; }
  std::int64_t unit_count() const { return unit_count_; }
  std::size_t vocab_size() const { return single_.size(); }

  std::int64_t single_count(TypeId t) const;
  std::int64_t pair_count(TypeId a, TypeId b) const;
  std::size_t num_pairs() const { return pairs_.size(); }

  // Pairs in canonical (a < b) order, sorted; used by serialization.
  std::vector<std::pair<std::pair<TypeId, TypeId>, std::int64_t>> sorted_pairs() const;

  // Adds one unit containing the given distinct, sorted types.
  void add_unit(const std::vector<TypeId>& distinct_types);
  void merge(const CooccurrenceStats& other);

  bool operator==(const CooccurrenceStats&) const = default;

  friend CooccurrenceStats load_cooccurrence(const std::filesystem::path& path);

 private:
  static std::uint64_t key(TypeId a, TypeId b);

  CountMode mode_ = CountMode::document;
  int window_size_ = 0;
  std::int64_t unit_count_ = 0;
  std::vector<std::int64_t> single_;
  std::unordered_map<std::uint64_t, std::int64_t> pairs_;
};

// Window mode slides a window of window_size tokens by one position; a
// document shorter than the window contributes one window covering all of it
// (empty documents contribute none).
CooccurrenceStats count_cooccurrence(const std::vector<Document>& docs, std::size_t vocab_size,
                                     CountMode mode, int window_size = 20);

void save_cooccurrence(const std::filesystem::path& path, const CooccurrenceStats& stats,
                       std::string_view config_hash);
CooccurrenceStats load_cooccurrence(const std::filesystem::path& path);

}  // namespace topeval
