#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <iosfwd>
#include <utility>
#include <vector>

namespace grapher {

// Exit-code category a failure maps to at the CLI boundary.
enum class ErrorKind { config, data, not_found, stage };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class NotFoundError : public Error {
 public:
  explicit NotFoundError(const std::string& what) : Error(ErrorKind::not_found, what) {}
};

// Orders ids so that digit runs compare numerically: "v3" < "v10".
bool natural_less(std::string_view a, std::string_view b);

struct NaturalLess {
  bool operator()(std::string_view a, std::string_view b) const { return natural_less(a, b); }
};

// Unordered pair of node ids, stored with first <= second in natural order.
struct NodePair {
  std::string first;
  std::string second;

  NodePair() = default;
  NodePair(std::string a, std::string b) {
    if (natural_less(b, a)) std::swap(a, b);
    first = std::move(a);
    second = std::move(b);
  }

  bool operator==(const NodePair&) const = default;
  bool operator<(const NodePair& o) const {
    if (first != o.first) return natural_less(first, o.first);
    return natural_less(second, o.second);
  }
};

struct NodePairHash {
  std::size_t operator()(const NodePair& p) const noexcept;
};

// Lower-cased copy (ASCII).
std::string case_fold(std::string_view s);

struct KeyValue {
  std::string key;
  std::string value;
  int line = 0;
};

// Flat "key = value" lines; '#' starts a comment, blank lines ignored.
std::vector<KeyValue> parse_key_values(std::istream& in);

std::vector<std::string> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

// Shortest text that parses back to the same double.
std::string format_double(double v);

}  // namespace grapher
