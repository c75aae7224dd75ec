#include "topeval/index.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "topeval/records.hpp"

namespace topeval {
namespace {
constexpr std::string_view kIndexMagic = "#topeval-index";
}

const std::vector<Posting>& InvertedIndex::postings(TypeId t) const {
  return postings_.at(static_cast<std::size_t>(t));
}

std::optional<std::size_t> InvertedIndex::find_doc(std::string_view id) const {
  auto it = doc_pos_.find(id);
  if (it == doc_pos_.end()) return std::nullopt;
  return it->second;
}

std::int32_t InvertedIndex::tf(TypeId t, std::size_t doc) const {
  const auto& p = postings(t);
  auto it = std::lower_bound(p.begin(), p.end(), static_cast<std::int32_t>(doc),
                             [](const Posting& a, std::int32_t d) { return a.doc < d; });
  return (it != p.end() && it->doc == static_cast<std::int32_t>(doc)) ? it->tf : 0;
}

std::int64_t InvertedIndex::coll_freq(TypeId t) const {
  return coll_freq_.at(static_cast<std::size_t>(t));
}

InvertedIndex build_index(const std::vector<Document>& docs, std::size_t vocab_size) {
  InvertedIndex idx;
  idx.postings_.assign(vocab_size, {});
  idx.coll_freq_.assign(vocab_size, 0);
  std::vector<std::int32_t> counts(vocab_size, 0);
  std::vector<TypeId> touched;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const auto& doc = docs[d];
    if (!idx.doc_pos_.emplace(doc.id, d).second)
      throw Error("build_index: duplicate document id " + doc.id);
    idx.doc_ids_.push_back(doc.id);
    idx.doc_len_.push_back(static_cast<std::int64_t>(doc.token_ids.size()));
    touched.clear();
    for (TypeId t : doc.token_ids) {
      if (t < 0 || static_cast<std::size_t>(t) >= vocab_size)
        throw Error("build_index: type id out of range in " + doc.id);
      if (counts[static_cast<std::size_t>(t)]++ == 0) touched.push_back(t);
    }
    std::sort(touched.begin(), touched.end());
    for (TypeId t : touched) {
      auto& c = counts[static_cast<std::size_t>(t)];
      idx.postings_[static_cast<std::size_t>(t)].push_back({static_cast<std::int32_t>(d), c});
      idx.coll_freq_[static_cast<std::size_t>(t)] += c;
      c = 0;
    }
    idx.total_tokens_ += static_cast<std::int64_t>(doc.token_ids.size());
  }
  return idx;
}

void save_index(const std::filesystem::path& path, const InvertedIndex& index,
                std::string_view config_hash) {
  std::ostringstream out;
  out << kIndexMagic << '\t' << 1 << '\t' << config_hash << '\n';
  out << "docs\t" << index.num_docs() << '\t' << index.num_types() << '\t'
      << index.total_tokens() << '\n';
  for (std::size_t d = 0; d < index.num_docs(); ++d)
    out << "d\t" << d << '\t' << index.doc_id(d) << '\t' << index.doc_len(d) << '\n';
  for (std::size_t t = 0; t < index.num_types(); ++t) {
    out << "t\t" << t << '\t' << index.coll_freq(static_cast<TypeId>(t));
    for (const auto& p : index.postings(static_cast<TypeId>(t))) out << '\t' << p.doc << ':' << p.tf;
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

InvertedIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open index: " + path.string());
  auto fail = [&](const std::string& why) { return Error(path.string() + ": " + why); };
  std::string line;
  std::getline(in, line);
  if (line.rfind(std::string(kIndexMagic) + "\t1\t", 0) != 0)
    throw fail("not a version-1 index file");
  InvertedIndex idx;
  std::size_t n_docs = 0, n_types = 0;
  {
    std::getline(in, line);
    std::istringstream ls(line);
    std::string tag;
    ls >> tag >> n_docs >> n_types >> idx.total_tokens_;
    if (tag != "docs" || !ls) throw fail("bad docs line");
  }
  for (std::size_t d = 0; d < n_docs; ++d) {
    if (!std::getline(in, line)) throw fail("truncated document table");
    std::istringstream ls(line);
    std::string tag, id;
    std::size_t pos;
    std::int64_t len;
    std::getline(ls, tag, '\t');
    ls >> pos;
    ls.ignore(1);
    std::getline(ls, id, '\t');
    ls >> len;
    if (tag != "d" || pos != d || !ls) throw fail("bad document line " + std::to_string(d));
    idx.doc_pos_.emplace(id, d);
    idx.doc_ids_.push_back(id);
    idx.doc_len_.push_back(len);
  }
  idx.postings_.resize(n_types);
  idx.coll_freq_.resize(n_types);
  for (std::size_t t = 0; t < n_types; ++t) {
    if (!std::getline(in, line)) throw fail("truncated postings");
    std::istringstream ls(line);
    std::string tag, entry;
    std::size_t type;
    ls >> tag >> type >> idx.coll_freq_[t];
    if (tag != "t" || type != t) throw fail("bad postings line " + std::to_string(t));
    while (ls >> entry) {
      const auto colon = entry.find(':');
      if (colon == std::string::npos) throw fail("bad posting '" + entry + "'");
      idx.postings_[t].push_back(
          {std::stoi(entry.substr(0, colon)), std::stoi(entry.substr(colon + 1))});
    }
  }
  return idx;
}

}  // namespace topeval
