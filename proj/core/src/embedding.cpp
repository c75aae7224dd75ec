#include "topeval/embedding.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "topeval/error.hpp"
#include "topeval/records.hpp"

namespace topeval {

void EmbeddingTable::add(std::string word, std::vector<double> vec) {
  if (vec.size() != dim_)
    throw Error("embedding for '" + word + "' has length " + std::to_string(vec.size()) +
                ", expected " + std::to_string(dim_));
  auto [it, inserted] = index_.emplace(std::move(word), index_.size());
  if (!inserted) {
    std::copy(vec.begin(), vec.end(), data_.begin() + static_cast<std::ptrdiff_t>(it->second * dim_));
    return;
  }
  data_.insert(data_.end(), vec.begin(), vec.end());
}

std::optional<std::span<const double>> EmbeddingTable::vector_of(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return std::span<const double>(data_.data() + it->second * dim_, dim_);
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open embeddings: " + path.string());
  std::size_t count = 0, dim = 0;
  std::string line;
  if (!std::getline(in, line)) throw Error(path.string() + ": empty embedding file");
  {
    std::istringstream hs(line);
    if (!(hs >> count >> dim) || dim == 0)
      throw Error(path.string() + ": header must be \"count dim\"");
  }
  EmbeddingTable table(dim);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    std::vector<double> vec;
    vec.reserve(dim);
    double x;
    while (ls >> x) vec.push_back(x);
    if (vec.size() != dim)
      throw Error(path.string() + ":" + std::to_string(lineno) + ": expected " +
                  std::to_string(dim) + " values");
    table.add(std::move(word), std::move(vec));
  }
  if (table.size() != count)
    throw Error(path.string() + ": header declares " + std::to_string(count) + " vectors, found " +
                std::to_string(table.size()));
  return table;
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table,
                     const std::vector<std::string>& words) {
  std::ostringstream out;
  out << std::setprecision(17);
  std::size_t n = 0;
  for (const auto& w : words)
    if (table.vector_of(w)) ++n;
  out << n << ' ' << table.dim() << '\n';
  for (const auto& w : words) {
    auto v = table.vector_of(w);
    if (!v) continue;
    out << w;
    for (double x : *v) out << ' ' << x;
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace topeval
