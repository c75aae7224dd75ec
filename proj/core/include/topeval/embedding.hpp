#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace topeval {

class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim = 0) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return index_.size(); }

  void add(std::string word, std::vector<double> vec);
  std::optional<std::span<const double>> vector_of(std::string_view word) const;

 private:
  std::size_t dim_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> data_;
};

// Text vector format: header "count dim", then "word v1 ... vdim" per line.
EmbeddingTable load_embeddings(const std::filesystem::path& path);
void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table,
                     const std::vector<std::string>& words);

double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace topeval
