#include "grapher/embedding.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "grapher/common.hpp"

namespace grapher {

void EmbeddingTable::set(std::string key, std::span<const double> v) {
  if (v.size() != dim_)
    throw DataError("vector for '" + key + "' has " + std::to_string(v.size()) + " components, expected " +
                    std::to_string(dim_));
  auto it = index_.find(key);
  if (it != index_.end()) {
    std::copy(v.begin(), v.end(), data_.begin() + static_cast<std::ptrdiff_t>(it->second * dim_));
    return;
  }
  index_.emplace(key, keys_.size());
  keys_.push_back(std::move(key));
  data_.insert(data_.end(), v.begin(), v.end());
}

bool EmbeddingTable::contains(std::string_view key) const { return index_.count(std::string(key)) != 0; }

const double* EmbeddingTable::find(std::string_view key) const {
  auto it = index_.find(std::string(key));
  return it == index_.end() ? nullptr : data_.data() + it->second * dim_;
}

std::optional<std::size_t> EmbeddingTable::index_of(std::string_view key) const {
  auto it = index_.find(std::string(key));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::span<const double> EmbeddingTable::get(std::string_view key) const {
  const double* p = find(key);
  if (!p) throw NotFoundError("no embedding for '" + std::string(key) + "'");
  return {p, dim_};
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double cosine(std::span<const double> a, std::span<const double> b) {
  double na = norm(a), nb = norm(b);
  if (na == 0 || nb == 0) return 0.0;
  return dot(a, b) / (na * nb);
}

double cosine_distance(std::span<const double> a, std::span<const double> b) {
  double na = norm(a), nb = norm(b);
  if (na == 0 || nb == 0) return 1.0;
  double d = 1.0 - dot(a, b) / (na * nb);
  return d < 0 ? 0.0 : d;
}

void write_embeddings_text(const EmbeddingTable& t, std::ostream& out) {
  out << t.size() << ' ' << t.dim() << '\n';
  for (std::size_t i = 0; i < t.size(); ++i) {
    out << t.keys()[i];
    for (double v : t.row(i)) out << ' ' << format_double(v);
    out << '\n';
  }
}

EmbeddingTable read_embeddings_text(std::istream& in) {
  std::size_t count = 0, dim = 0;
  std::string line;
  if (!std::getline(in, line)) throw DataError("embedding file is empty");
  {
    std::istringstream hs(line);
    if (!(hs >> count >> dim)) throw DataError("embedding header must be '<count> <dim>'");
  }
  EmbeddingTable t(dim);
  std::vector<double> v(dim);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw DataError("embedding file truncated at entry " + std::to_string(i + 1));
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    for (std::size_t k = 0; k < dim; ++k) {
      std::string tok;
      if (!(ls >> tok)) throw DataError("embedding line " + std::to_string(i + 2) + " has too few values");
      v[k] = std::stod(tok);
    }
    t.set(std::move(key), v);
  }
  return t;
}

namespace {

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes;
  std::uint64_t bits = 0;
  if constexpr (std::is_floating_point_v<T>) bits = std::bit_cast<std::uint64_t>(static_cast<double>(value));
  else bits = static_cast<std::uint64_t>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(bytes.data(), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) throw DataError("binary embedding file truncated");
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  if constexpr (std::is_floating_point_v<T>) return std::bit_cast<double>(bits);
  else return static_cast<T>(bits);
}

}  // namespace

void write_embeddings_binary(const EmbeddingTable& t, std::ostream& out) {
  out.write("GEMB", 4);
  put_le<std::uint32_t>(out, 1);
  put_le<std::uint64_t>(out, t.size());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.dim()));
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& k = t.keys()[i];
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(k.size()));
    out.write(k.data(), static_cast<std::streamsize>(k.size()));
    for (double v : t.row(i)) put_le<double>(out, v);
  }
}

EmbeddingTable read_embeddings_binary(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "GEMB", 4) != 0) throw DataError("not a binary embedding file");
  if (get_le<std::uint32_t>(in) != 1) throw DataError("unsupported binary embedding version");
  auto count = get_le<std::uint64_t>(in);
  auto dim = get_le<std::uint32_t>(in);
  EmbeddingTable t(dim);
  std::vector<double> v(dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    auto len = get_le<std::uint32_t>(in);
    std::string key(len, '\0');
    if (!in.read(key.data(), len)) throw DataError("binary embedding file truncated");
    for (auto& x : v) x = get_le<double>(in);
    t.set(std::move(key), v);
  }
  return t;
}

void save_embeddings(const EmbeddingTable& t, const std::string& path) {
  bool binary = path.size() >= 4 && path.compare(path.size() - 4, 4, ".bin") == 0;
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw DataError("cannot write " + path);
  if (binary) write_embeddings_binary(t, out);
  else write_embeddings_text(t, out);
}

EmbeddingTable load_embeddings(const std::string& path) {
  bool binary = path.size() >= 4 && path.compare(path.size() - 4, 4, ".bin") == 0;
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw DataError("cannot open " + path);
  return binary ? read_embeddings_binary(in) : read_embeddings_text(in);
}

}  // namespace grapher
