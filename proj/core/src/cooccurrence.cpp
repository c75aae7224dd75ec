#include "topeval/cooccurrence.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "topeval/records.hpp"

namespace topeval {
namespace {
constexpr std::string_view kCoocMagic = "#topeval-cooc";
}

std::string_view to_string(CountMode mode) {
  return mode == CountMode::window ? "window" : "document";
}

CountMode parse_count_mode(std::string_view s) {
  if (s == "window") return CountMode::window;
  if (s == "document") return CountMode::document;
  throw Error("unknown count mode '" + std::string(s) + "'");
}

CooccurrenceStats::CooccurrenceStats(CountMode mode, int window_size, std::size_t vocab_size)
    : mode_(mode), window_size_(mode == CountMode::window ? window_size : 0),
      single_(vocab_size, 0) {
  if (mode == CountMode::window && window_size < 2)
    throw Error("window_size must be at least 2");
}

std::uint64_t CooccurrenceStats::key(TypeId a, TypeId b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

std::int64_t CooccurrenceStats::single_count(TypeId t) const {
  if (t < 0 || static_cast<std::size_t>(t) >= single_.size()) return 0;
  return single_[static_cast<std::size_t>(t)];
}

std::int64_t CooccurrenceStats::pair_count(TypeId a, TypeId b) const {
  if (a == b) return single_count(a);
  auto it = pairs_.find(key(a, b));
  return it == pairs_.end() ? 0 : it->second;
}

std::vector<std::pair<std::pair<TypeId, TypeId>, std::int64_t>> CooccurrenceStats::sorted_pairs()
    const {
  std::vector<std::pair<std::uint64_t, std::int64_t>> raw(pairs_.begin(), pairs_.end());
  std::sort(raw.begin(), raw.end());
  std::vector<std::pair<std::pair<TypeId, TypeId>, std::int64_t>> out;
  out.reserve(raw.size());
  for (const auto& [k, c] : raw)
    out.push_back({{static_cast<TypeId>(k >> 32), static_cast<TypeId>(k & 0xffffffffULL)}, c});
  return out;
}

void CooccurrenceStats::add_unit(const std::vector<TypeId>& types) {
  ++unit_count_;
  for (std::size_t i = 0; i < types.size(); ++i) {
    ++single_.at(static_cast<std::size_t>(types[i]));
    for (std::size_t j = i + 1; j < types.size(); ++j) ++pairs_[key(types[i], types[j])];
  }
}

void CooccurrenceStats::merge(const CooccurrenceStats& other) {
  if (other.mode_ != mode_ || other.window_size_ != window_size_ ||
      other.single_.size() != single_.size())
    throw Error("merge: incompatible co-occurrence stats");
  unit_count_ += other.unit_count_;
  for (std::size_t t = 0; t < single_.size(); ++t) single_[t] += other.single_[t];
  for (const auto& [k, c] : other.pairs_) pairs_[k] += c;
}

CooccurrenceStats count_cooccurrence(const std::vector<Document>& docs, std::size_t vocab_size,
                                     CountMode mode, int window_size) {
  CooccurrenceStats stats(mode, window_size, vocab_size);
  std::vector<TypeId> unit;
  if (mode == CountMode::document) {
    for (const auto& doc : docs) {
      unit.assign(doc.token_ids.begin(), doc.token_ids.end());
      std::sort(unit.begin(), unit.end());
      unit.erase(std::unique(unit.begin(), unit.end()), unit.end());
      stats.add_unit(unit);
    }
    return stats;
  }
  const auto w = static_cast<std::size_t>(window_size);
  for (const auto& doc : docs) {
    const auto& toks = doc.token_ids;
    if (toks.empty()) continue;
    const std::size_t n_windows = toks.size() >= w ? toks.size() - w + 1 : 1;
    for (std::size_t start = 0; start < n_windows; ++start) {
      const auto end = std::min(toks.size(), start + w);
      unit.assign(toks.begin() + static_cast<std::ptrdiff_t>(start),
                  toks.begin() + static_cast<std::ptrdiff_t>(end));
      std::sort(unit.begin(), unit.end());
      unit.erase(std::unique(unit.begin(), unit.end()), unit.end());
      stats.add_unit(unit);
    }
  }
  return stats;
}

void save_cooccurrence(const std::filesystem::path& path, const CooccurrenceStats& stats,
                       std::string_view config_hash) {
  std::ostringstream out;
  out << kCoocMagic << '\t' << 1 << '\t' << config_hash << '\n';
  out << "mode\t" << to_string(stats.mode()) << '\t' << stats.window_size() << '\t'
      << stats.unit_count() << '\t' << stats.vocab_size() << '\n';
  for (std::size_t t = 0; t < stats.vocab_size(); ++t) {
    const auto c = stats.single_count(static_cast<TypeId>(t));
    if (c) out << "s\t" << t << '\t' << c << '\n';
  }
  for (const auto& [p, c] : stats.sorted_pairs())
    out << "p\t" << p.first << '\t' << p.second << '\t' << c << '\n';
  write_file_atomic(path, out.str());
}

CooccurrenceStats load_cooccurrence(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open co-occurrence stats: " + path.string());
  auto fail = [&](const std::string& why) { return Error(path.string() + ": " + why); };
  std::string line;
  std::getline(in, line);
  if (line.rfind(std::string(kCoocMagic) + "\t1\t", 0) != 0)
    throw fail("not a version-1 co-occurrence file");
  std::string tag, mode;
  int window = 0;
  std::int64_t units = 0;
  std::size_t vocab = 0;
  in >> tag >> mode >> window >> units >> vocab;
  if (tag != "mode" || !in) throw fail("bad mode line");
  const auto m = parse_count_mode(mode);
  CooccurrenceStats stats(m, m == CountMode::window ? window : 2, vocab);
  stats.unit_count_ = units;
  while (in >> tag) {
    if (tag == "s") {
      std::size_t t;
      std::int64_t c;
      in >> t >> c;
      if (!in || t >= vocab) throw fail("bad single-count line");
      stats.single_[t] = c;
    } else if (tag == "p") {
      TypeId a, b;
      std::int64_t c;
      in >> a >> b >> c;
      if (!in) throw fail("bad pair line");
      stats.pairs_[CooccurrenceStats::key(a, b)] = c;
    } else {
      throw fail("unknown record tag '" + tag + "'");
    }
  }
  return stats;
}

}  // namespace topeval
