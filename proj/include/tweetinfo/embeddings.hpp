#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tweetinfo/errors.hpp"
#include "tweetinfo/io.hpp"

namespace tweetinfo {

using TokenId = std::int32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnkToken = "<unk>";

/// Dense token <-> index map. Indices 0 and 1 are always PAD and UNK; the
/// reserved entries are display names only and are never matched by lookup.
class Vocabulary {
 public:
  Vocabulary() : tokens_{std::string(kPadToken), std::string(kUnkToken)} {}

  /// Returns the new index, or the existing one if the token is present.
  TokenId add(std::string_view token) {
    if (auto it = index_.find(std::string(token)); it != index_.end()) return it->second;
    const auto id = static_cast<TokenId>(tokens_.size());
    tokens_.emplace_back(token);
    index_.emplace(tokens_.back(), id);
    return id;
  }

  TokenId lookup(std::string_view token) const {
    const auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnkId : it->second;
  }

  bool contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }

  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// FNV-1a over the newline-joined token list; identifies a vocabulary in
  /// checkpoints.
  std::uint64_t hash() const {
    std::uint64_t h = 14695981039346656037ull;
    for (const auto& t : tokens_) {
      for (unsigned char c : t) {
        h ^= c;
        h *= 1099511628211ull;
      }
      h ^= static_cast<unsigned char>('\n');
      h *= 1099511628211ull;
    }
    return h;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Vocabulary plus one `dim`-component vector per index. The PAD row is all
/// zeros; the UNK row is the mean of every vector read from the source file.
/// Immutable once built.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim) : dim_(dim), vectors_(2 * dim, 0.0) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vocab_.size(); }
  const Vocabulary& vocab() const { return vocab_; }

  std::span<const double> vector(TokenId id) const {
    return {vectors_.data() + static_cast<std::size_t>(id) * dim_, dim_};
  }
  std::span<const double> lookup(std::string_view token) const { return vector(vocab_.lookup(token)); }

  /// Row-major [size() x dim()] storage.
  const std::vector<double>& data() const { return vectors_; }

  friend EmbeddingTable load_vectors(std::istream& in, std::size_t dim, std::string_view source);
  friend EmbeddingTable restrict_to_corpus(const EmbeddingTable& table,
                                           const std::unordered_set<std::string>& corpus_tokens);

 private:
  void append(std::string_view token, std::span<const double> values) {
    vocab_.add(token);
    vectors_.insert(vectors_.end(), values.begin(), values.end());
  }
  std::span<double> unk_row() { return {vectors_.data() + kUnkId * dim_, dim_}; }

  std::size_t dim_;
  Vocabulary vocab_;
  std::vector<double> vectors_;
};

/// Reads the whitespace-separated GloVe text format: a token followed by
/// exactly `dim` decimal components per line. Later duplicates of a token are
/// ignored.
inline EmbeddingTable load_vectors(std::istream& in, std::size_t dim,
                                   std::string_view source = "<stream>") {
  if (dim == 0) throw UsageError("embedding dimension must be >= 1");
  EmbeddingTable table(dim);
  std::vector<double> values(dim);
  std::vector<double> sum(dim, 0.0);
  std::size_t loaded = 0;
  std::string line;
  std::size_t line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    const auto where = [&] { return std::string(source) + ":" + std::to_string(line_no); };
    std::string_view rest(line);
    if (!rest.empty() && rest.back() == '\r') rest.remove_suffix(1);

    const auto next_field = [&rest]() -> std::string_view {
      const auto b = rest.find_first_not_of(" \t");
      if (b == std::string_view::npos) {
        rest = {};
        return {};
      }
      rest.remove_prefix(b);
      const auto e = rest.find_first_of(" \t");
      const auto field = rest.substr(0, e);
      rest.remove_prefix(e == std::string_view::npos ? rest.size() : e);
      return field;
    };

    const auto token = next_field();
    if (token.empty()) continue;

    std::size_t count = 0;
    for (auto field = next_field(); !field.empty(); field = next_field()) {
      if (count < dim) {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
        if (ec != std::errc() || ptr != field.data() + field.size()) {
          throw DataError(where() + ": cannot parse component '" + std::string(field) + "'");
        }
        if (!std::isfinite(v)) throw DataError(where() + ": non-finite component");
        values[count] = v;
      }
      ++count;
    }
    if (count != dim) {
      throw DataError(where() + ": expected " + std::to_string(dim) + " components, got " +
                      std::to_string(count));
    }
    if (table.vocab_.contains(token)) continue;
    table.append(token, values);
    for (std::size_t d = 0; d < dim; ++d) sum[d] += values[d];
    ++loaded;
  }

  if (loaded > 0) {
    auto unk = table.unk_row();
    for (std::size_t d = 0; d < dim; ++d) unk[d] = sum[d] / static_cast<double>(loaded);
  }
  return table;
}

inline EmbeddingTable load_vectors(const std::filesystem::path& path, std::size_t dim) {
  auto in = io::open_input(path);
  return load_vectors(in, dim, path.string());
}

/// Keeps only the tokens that occur in the corpus, preserving their relative
/// order and exact vector values. PAD and UNK (including the original UNK
/// mean) survive unconditionally.
inline EmbeddingTable restrict_to_corpus(const EmbeddingTable& table,
                                         const std::unordered_set<std::string>& corpus_tokens) {
  EmbeddingTable out(table.dim());
  const auto unk = table.vector(kUnkId);
  std::copy(unk.begin(), unk.end(), out.unk_row().begin());
  for (std::size_t id = 2; id < table.size(); ++id) {
    const auto& token = table.vocab().token(static_cast<TokenId>(id));
    if (corpus_tokens.count(token)) out.append(token, table.vector(static_cast<TokenId>(id)));
  }
  return out;
}

}  // namespace tweetinfo
