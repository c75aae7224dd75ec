#include "topeval/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include <json.hpp>

#include "topeval/records.hpp"

namespace topeval {
namespace {

using json = nlohmann::json;

constexpr std::string_view kDocsFormat = "topeval.documents";
constexpr std::string_view kVocabMagic = "#topeval-vocab";

bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

bool is_letter_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& ch : out)
    if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
  return out;
}

bool has_letter(std::string_view s) {
  return std::any_of(s.begin(), s.end(),
                     [](char c) { return is_letter_byte(static_cast<unsigned char>(c)); });
}

}  // namespace

std::optional<TypeId> Vocabulary::find(std::string_view word) const {
  auto it = id_of.find(std::string(word));
  if (it == id_of.end()) return std::nullopt;
  return it->second;
}

double Vocabulary::collection_prob(TypeId t) const {
  if (total_tokens == 0) return 0.0;
  return static_cast<double>(coll_freq.at(static_cast<std::size_t>(t))) /
         static_cast<double>(total_tokens);
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    if (!is_word_byte(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n) {
      const auto c = static_cast<unsigned char>(text[j]);
      if (is_word_byte(c)) {
        ++j;
      } else if ((c == '\'' || c == '-') && j + 1 < n &&
                 is_word_byte(static_cast<unsigned char>(text[j + 1]))) {
        j += 2;
      } else {
        break;
      }
    }
    auto tok = text.substr(i, j - i);
    if (has_letter(tok)) out.push_back(lower_ascii(tok));
    i = j;
  }
  return out;
}

std::vector<std::size_t> sentence_ends(std::string_view text) {
  std::vector<std::size_t> ends;
  const std::size_t n = text.size();
  for (std::size_t i = 0; i < n; ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    std::size_t j = i + 1;
    if (j >= n || !std::isspace(static_cast<unsigned char>(text[j]))) continue;
    while (j < n && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j < n && text[j] >= 'A' && text[j] <= 'Z') ends.push_back(i + 1);
  }
  if (ends.empty() || ends.back() != n) ends.push_back(n);
  return ends;
}

std::string make_snippet(std::string_view text, std::size_t sentences) {
  if (sentences == 0) return {};
  const auto ends = sentence_ends(text);
  const std::size_t pick = std::min(sentences, ends.size()) - 1;
  return std::string(text.substr(0, ends[pick]));
}

PreprocessResult preprocess(const std::vector<RawDocument>& raw_docs,
                            const PreprocessConfig& config) {
  if (raw_docs.empty()) throw Error("preprocess: empty corpus");

  std::vector<std::vector<std::string>> streams(raw_docs.size());
  std::map<std::string, std::int64_t> freq;
  for (std::size_t d = 0; d < raw_docs.size(); ++d) {
    const auto& raw = raw_docs[d];
    std::vector<std::string> toks;
    if (raw.pretokenized) {
      for (const auto& t : raw.tokens) toks.push_back(lower_ascii(t));
    } else {
      toks = tokenize(raw.text);
    }
    std::erase_if(toks, [&](const std::string& t) { return config.stop_words.contains(t); });
    for (const auto& t : toks) ++freq[t];
    streams[d] = std::move(toks);
  }

  std::vector<std::pair<std::string, std::int64_t>> survivors;
  for (const auto& [w, c] : freq)
    if (c >= config.min_count) survivors.emplace_back(w, c);
  std::stable_sort(survivors.begin(), survivors.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const auto n_exclude = static_cast<std::size_t>(
      config.top_exclude_fraction * static_cast<double>(survivors.size()));

  PreprocessResult result;
  std::unordered_set<std::string> keep;
  for (std::size_t i = 0; i < survivors.size(); ++i) {
    if (i < n_exclude)
      result.excluded_top_types.push_back(survivors[i].first);
    else
      keep.insert(survivors[i].first);
  }

  result.docs.reserve(raw_docs.size());
  for (std::size_t d = 0; d < raw_docs.size(); ++d) {
    const auto& raw = raw_docs[d];
    Document doc;
    doc.id = raw.id;
    if (raw.pretokenized) {
      for (std::size_t i = 0; i < raw.tokens.size(); ++i) {
        if (i) doc.raw_text += ' ';
        doc.raw_text += raw.tokens[i];
      }
    } else {
      doc.raw_text = raw.text;
    }
    doc.snippet = make_snippet(doc.raw_text);
    for (auto& t : streams[d])
      if (keep.contains(t)) doc.tokens.push_back(std::move(t));
    if (doc.tokens.empty()) result.empty_doc_ids.push_back(doc.id);
    result.docs.push_back(std::move(doc));
  }
  result.vocab = make_vocabulary(result.docs);
  return result;
}

Vocabulary make_vocabulary(std::vector<Document>& docs) {
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> counts;  // df, cf
  for (const auto& doc : docs) {
    std::unordered_set<std::string_view> seen;
    for (const auto& t : doc.tokens) {
      auto& c = counts[t];
      ++c.second;
      if (seen.insert(t).second) ++c.first;
    }
  }
  Vocabulary v;
  for (auto& [w, c] : counts) {
    v.id_of.emplace(w, static_cast<TypeId>(v.types.size()));
    v.types.push_back(w);
    v.doc_freq.push_back(c.first);
    v.coll_freq.push_back(c.second);
    v.total_tokens += c.second;
  }
  for (auto& doc : docs) {
    doc.token_ids.clear();
    doc.token_ids.reserve(doc.tokens.size());
    for (const auto& t : doc.tokens) doc.token_ids.push_back(v.id_of.at(t));
  }
  return v;
}

std::vector<RawDocument> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus: " + path.string());
  std::vector<RawDocument> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    const std::size_t index = lineno++;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    RawDocument raw;
    if (line.front() == '{') {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw Error("corpus line " + std::to_string(index + 1) + ": " + e.what());
      }
      raw.id = j.contains("id") ? j.at("id").get<std::string>() : "doc" + std::to_string(index);
      if (j.contains("tokens")) {
        raw.tokens = j.at("tokens").get<std::vector<std::string>>();
        raw.pretokenized = true;
      } else if (j.contains("text")) {
        raw.text = j.at("text").get<std::string>();
      } else {
        throw Error("corpus line " + std::to_string(index + 1) + ": needs \"text\" or \"tokens\"");
      }
    } else {
      raw.id = "doc" + std::to_string(index);
      raw.text = line;
    }
    docs.push_back(std::move(raw));
  }
  return docs;
}

void save_documents(const std::filesystem::path& path, const std::vector<Document>& docs,
                    std::string_view config_hash) {
  std::string out = header_line(kDocsFormat, config_hash);
  for (const auto& doc : docs) {
    json j;
    j["id"] = doc.id;
    j["text"] = doc.raw_text;
    j["snippet_len"] = doc.snippet.size();
    j["tokens"] = doc.tokens;
    out += j.dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::vector<Document> load_documents(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::vector<Document> docs;
  for (const auto& line : read_record_lines(path, kDocsFormat)) {
    const auto j = json::parse(line);
    Document doc;
    doc.id = j.at("id").get<std::string>();
    doc.raw_text = j.at("text").get<std::string>();
    doc.snippet = doc.raw_text.substr(0, j.at("snippet_len").get<std::size_t>());
    doc.tokens = j.at("tokens").get<std::vector<std::string>>();
    for (const auto& t : doc.tokens) {
      auto id = vocab.find(t);
      if (!id) throw Error("document " + doc.id + ": token '" + t + "' not in vocabulary");
      doc.token_ids.push_back(*id);
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

void save_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab,
                     std::string_view config_hash) {
  std::string out = std::string(kVocabMagic) + "\t1\t" + std::string(config_hash) + "\n";
  out += "total_tokens\t" + std::to_string(vocab.total_tokens) + "\n";
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    out += std::to_string(i) + "\t" + vocab.types[i] + "\t" + std::to_string(vocab.doc_freq[i]) +
           "\t" + std::to_string(vocab.coll_freq[i]) + "\n";
  }
  write_file_atomic(path, out);
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open vocabulary: " + path.string());
  std::string magic, version, hash;
  std::getline(in, magic, '\t');
  std::getline(in, version, '\t');
  std::getline(in, hash);
  if (magic != kVocabMagic || version != "1")
    throw Error(path.string() + ": not a version-1 vocabulary file");
  std::string key;
  Vocabulary v;
  in >> key >> v.total_tokens;
  if (key != "total_tokens") throw Error(path.string() + ": missing total_tokens");
  std::size_t id;
  std::string word;
  std::int64_t df, cf, sum = 0;
  while (in >> id >> word >> df >> cf) {
    if (id != v.types.size()) throw Error(path.string() + ": ids must be dense and ordered");
    v.id_of.emplace(word, static_cast<TypeId>(id));
    v.types.push_back(word);
    v.doc_freq.push_back(df);
    v.coll_freq.push_back(cf);
    sum += cf;
  }
  if (sum != v.total_tokens) throw Error(path.string() + ": collection frequencies do not sum");
  return v;
}

}  // namespace topeval
