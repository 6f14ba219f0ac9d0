#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace grapher {

// Dense d-dimensional vectors keyed by node id or token, in insertion order.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim = 0) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return keys_.size(); }
  bool empty() const { return keys_.empty(); }

  void set(std::string key, std::span<const double> v);
  bool contains(std::string_view key) const;
  const double* find(std::string_view key) const;
  std::optional<std::size_t> index_of(std::string_view key) const;
  // Throws NotFoundError.
  std::span<const double> get(std::string_view key) const;

  std::span<const std::string> keys() const { return keys_; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

  bool operator==(const EmbeddingTable& o) const { return dim_ == o.dim_ && keys_ == o.keys_ && data_ == o.data_; }

 private:
  std::size_t dim_;
  std::vector<std::string> keys_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
// Cosine similarity; 0 when either vector is zero.
double cosine(std::span<const double> a, std::span<const double> b);
// 1 - cosine, with zero vectors at distance 1 from everything.
double cosine_distance(std::span<const double> a, std::span<const double> b);

// Text: first line "<count> <dim>", then "<key> v1 ... vd" per key. Keys must not contain spaces.
void write_embeddings_text(const EmbeddingTable& t, std::ostream& out);
EmbeddingTable read_embeddings_text(std::istream& in);

// Binary, little-endian: "GEMB", u32 version=1, u64 count, u32 dim, then per key
// u32 key length, key bytes, dim × f64.
void write_embeddings_binary(const EmbeddingTable& t, std::ostream& out);
EmbeddingTable read_embeddings_binary(std::istream& in);

void save_embeddings(const EmbeddingTable& t, const std::string& path);  // binary iff path ends in .bin
EmbeddingTable load_embeddings(const std::string& path);

}  // namespace grapher
