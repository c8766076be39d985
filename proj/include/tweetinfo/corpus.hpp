#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tweetinfo/errors.hpp"
#include "tweetinfo/io.hpp"
#include "tweetinfo/label.hpp"

namespace tweetinfo {

struct Tweet {
  std::string id;
  std::string text;
  std::optional<Label> label;

  friend bool operator==(const Tweet&, const Tweet&) = default;
};

struct LoadOptions {
  /// Require a third (label) column on every line.
  bool expect_labels = true;
  /// Compatibility mode for redistributed copies of the corpus: skip a
  /// leading "Id\tText[\tLabel]" header (case-insensitive) and strip a
  /// trailing '\r' from each line.
  bool lenient = false;
};

namespace detail {

inline bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

inline bool is_header(const std::vector<std::string_view>& fields) {
  if (fields.size() < 2 || fields.size() > 3) return false;
  if (!iequals(fields[0], "id") || !iequals(fields[1], "text")) return false;
  return fields.size() == 2 || iequals(fields[2], "label");
}

}  // namespace detail

/// Parses a split from a stream of "id\ttext[\tlabel]" lines. Empty lines are
/// skipped; line numbers in errors are 1-based physical lines.
inline std::vector<Tweet> load_split(std::istream& in, const LoadOptions& options = {},
                                     std::string_view source = "<stream>") {
  std::vector<Tweet> tweets;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  const auto where = [&] { return std::string(source) + ":" + std::to_string(line_no); };

  while (std::getline(in, line)) {
    ++line_no;
    if (options.lenient && !line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    const auto fields = io::split_fields(line);
    if (options.lenient && tweets.empty() && seen.empty() && detail::is_header(fields)) continue;

    const std::size_t wanted_min = options.expect_labels ? 3 : 2;
    if (fields.size() < wanted_min || fields.size() > 3) {
      throw DataError(where() + ": malformed line: expected " +
                      (options.expect_labels ? std::string("3") : std::string("2 or 3")) +
                      " tab-separated fields, got " + std::to_string(fields.size()));
    }
    if (fields[0].empty()) throw DataError(where() + ": empty id");
    if (fields[1].empty()) throw DataError(where() + ": empty text");

    Tweet tweet{std::string(fields[0]), std::string(fields[1]), std::nullopt};
    if (fields.size() == 3) {
      tweet.label = parse_label(fields[2]);
      if (!tweet.label) {
        throw DataError(where() + ": unknown label '" + std::string(fields[2]) + "'");
      }
    }
    if (!seen.insert(tweet.id).second) {
      throw DataError(where() + ": duplicate id '" + tweet.id + "'");
    }
    tweets.push_back(std::move(tweet));
  }
  return tweets;
}

inline std::vector<Tweet> load_split(const std::filesystem::path& path, bool expect_labels,
                                     bool lenient = false) {
  auto in = io::open_input(path);
  return load_split(in, LoadOptions{expect_labels, lenient}, path.string());
}

/// Inverse of load_split: one "id\ttext[\tlabel]" line per tweet.
inline std::string format_split(const std::vector<Tweet>& tweets) {
  std::string out;
  for (const auto& t : tweets) {
    out += t.id;
    out += '\t';
    out += t.text;
    if (t.label) {
      out += '\t';
      out += to_wire(*t.label);
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset statistics

/// Inter-annotator agreement (Fleiss' Kappa) reported for the official corpus.
/// Stored, never recomputed: annotator-level labels are not distributed.
inline constexpr double kOfficialFleissKappa = 0.8180;

struct SplitCounts {
  std::string split;
  std::size_t informative = 0;
  std::size_t uninformative = 0;

  std::size_t total() const { return informative + uninformative; }
  friend bool operator==(const SplitCounts&, const SplitCounts&) = default;
};

struct DatasetStats {
  std::vector<SplitCounts> splits;
  double fleiss_kappa = kOfficialFleissKappa;

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& s : splits) n += s.total();
    return n;
  }

  const SplitCounts* find(std::string_view name) const {
    for (const auto& s : splits)
      if (s.split == name) return &s;
    return nullptr;
  }
};

/// Published per-split label counts of the official release.
inline const std::array<SplitCounts, 3>& official_split_counts() {
  static const std::array<SplitCounts, 3> counts{{
      {"train", 3303, 3697},
      {"dev", 472, 528},
      {"test", 944, 1056},
  }};
  return counts;
}

using NamedSplit = std::pair<std::string, std::vector<Tweet>>;

inline SplitCounts count_labels(std::string split, const std::vector<Tweet>& tweets) {
  SplitCounts counts{std::move(split)};
  for (const auto& t : tweets) {
    if (!t.label) {
      throw DataError("split '" + counts.split + "': tweet '" + t.id + "' has no label");
    }
    if (*t.label == Label::kInformative) {
      ++counts.informative;
    } else {
      ++counts.uninformative;
    }
  }
  return counts;
}

inline DatasetStats summarize(const std::vector<NamedSplit>& splits) {
  DatasetStats stats;
  for (const auto& [name, tweets] : splits) stats.splits.push_back(count_labels(name, tweets));
  return stats;
}

/// Human-readable table followed by "split.label=count" lines.
inline std::string render_stats(const DatasetStats& stats) {
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-10s %12s %14s %8s\n", "split", "INFORMATIVE", "UNINFORMATIVE",
                "total");
  os << buf;
  for (const auto& s : stats.splits) {
    std::snprintf(buf, sizeof buf, "%-10s %12zu %14zu %8zu\n", s.split.c_str(), s.informative,
                  s.uninformative, s.total());
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "%-10s %12s %14s %8zu\n", "all", "", "", stats.total());
  os << buf << '\n';
  for (const auto& s : stats.splits) {
    os << s.split << ".INFORMATIVE=" << s.informative << '\n';
    os << s.split << ".UNINFORMATIVE=" << s.uninformative << '\n';
    os << s.split << ".total=" << s.total() << '\n';
  }
  os << "total=" << stats.total() << '\n';
  std::snprintf(buf, sizeof buf, "fleiss_kappa=%.4f\n", stats.fleiss_kappa);
  os << buf;
  return os.str();
}

}  // namespace tweetinfo
