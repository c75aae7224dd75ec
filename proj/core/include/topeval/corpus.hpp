#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "topeval/error.hpp"

namespace topeval {

using TypeId = std::int32_t;

struct Document {
  std::string id;
  std::string raw_text;
  std::vector<std::string> tokens;   // lowercased content words after filtering
  std::vector<TypeId> token_ids;     // tokens encoded against the final Vocabulary
  std::string snippet;               // first three sentences, a prefix of raw_text
};

struct Vocabulary {
  std::vector<std::string> types;
  std::unordered_map<std::string, TypeId> id_of;
  std::vector<std::int64_t> doc_freq;
  std::vector<std::int64_t> coll_freq;
  std::int64_t total_tokens = 0;

  std::size_t size() const { return types.size(); }
  std::optional<TypeId> find(std::string_view word) const;
  // Collection probability P(w|C); 0 for an empty collection.
  double collection_prob(TypeId t) const;
};

// Input unit before preprocessing. Either text or tokens is used: when
// pretokenized is set the tokenizer is bypassed.
struct RawDocument {
  std::string id;
  std::string text;
  std::vector<std::string> tokens;
  bool pretokenized = false;
};

struct PreprocessConfig {
  std::unordered_set<std::string> stop_words;  // lowercased
  std::int64_t min_count = 10;
  double top_exclude_fraction = 0.001;
};

struct PreprocessResult {
  std::vector<Document> docs;
  Vocabulary vocab;
  std::vector<std::string> excluded_top_types;   // removed by the top-fraction rule
  std::vector<std::string> empty_doc_ids;        // documents empty after filtering
};

// The bundled English stop list (the SMART list distributed with Mallet).
const std::unordered_set<std::string>& default_stop_words();
std::unordered_set<std::string> load_stop_words(const std::filesystem::path& path);

// Rule-based tokenizer: maximal runs of letters/digits, keeping an internal
// apostrophe or hyphen between two word characters. Bytes >= 0x80 count as
// word characters so UTF-8 words stay whole. ASCII is lowercased. Tokens
// without any letter (pure numbers) are dropped.
std::vector<std::string> tokenize(std::string_view text);

// Sentence boundaries: '.', '!' or '?' followed by whitespace and then an
// uppercase letter. Returns the end offsets (exclusive) of each sentence.
std::vector<std::size_t> sentence_ends(std::string_view text);
std::string make_snippet(std::string_view text, std::size_t sentences = 3);

PreprocessResult preprocess(const std::vector<RawDocument>& raw_docs,
                            const PreprocessConfig& config);

// Builds a vocabulary over already-clean tokens (no filtering) and encodes
// token_ids in place. Type ids follow lexicographic order.
Vocabulary make_vocabulary(std::vector<Document>& docs);

// Corpus input: one document per line. Lines starting with '{' are records
// {"id":..., "text":...} or {"id":..., "tokens":[...]}; other lines are plain
// text with id "doc<line index>". Blank lines are skipped.
std::vector<RawDocument> read_corpus(const std::filesystem::path& path);

// Processed documents as line records; see docs/formats.md.
void save_documents(const std::filesystem::path& path, const std::vector<Document>& docs,
                    std::string_view config_hash);
std::vector<Document> load_documents(const std::filesystem::path& path, const Vocabulary& vocab);

void save_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab,
                     std::string_view config_hash);
Vocabulary load_vocabulary(const std::filesystem::path& path);

}  // namespace topeval
