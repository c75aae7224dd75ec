#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "topeval/corpus.hpp"

namespace topeval {

struct Posting {
  std::int32_t doc;  // index into InvertedIndex::doc_ids
  std::int32_t tf;
  bool operator==(const Posting&) const = default;
};

// Native replacement for an external retrieval index: per-type postings
// sorted by document index, plus document lengths and collection stats.
class InvertedIndex {
 public:
  InvertedIndex() = default;

  std::size_t num_docs() const { return doc_ids_.size(); }
  std::size_t num_types() const { return postings_.size(); }
  std::int64_t total_tokens() const { return total_tokens_; }

  const std::vector<Posting>& postings(TypeId t) const;
  std::int64_t doc_len(std::size_t doc) const { return doc_len_.at(doc); }
  const std::string& doc_id(std::size_t doc) const { return doc_ids_.at(doc); }
  std::optional<std::size_t> find_doc(std::string_view id) const;

  // Term frequency of t in doc (binary search over postings).
  std::int32_t tf(TypeId t, std::size_t doc) const;
  std::int64_t coll_freq(TypeId t) const;

  bool operator==(const InvertedIndex&) const = default;

  friend InvertedIndex build_index(const std::vector<Document>& docs, std::size_t vocab_size);
  friend InvertedIndex load_index(const std::filesystem::path& path);

 private:
  std::vector<std::vector<Posting>> postings_;
  std::vector<std::int64_t> coll_freq_;
  std::vector<std::int64_t> doc_len_;
  std::vector<std::string> doc_ids_;
  std::map<std::string, std::size_t, std::less<>> doc_pos_;
  std::int64_t total_tokens_ = 0;
};

InvertedIndex build_index(const std::vector<Document>& docs, std::size_t vocab_size);

void save_index(const std::filesystem::path& path, const InvertedIndex& index,
                std::string_view config_hash);
InvertedIndex load_index(const std::filesystem::path& path);

}  // namespace topeval
