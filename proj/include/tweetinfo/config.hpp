#pragma once

// Run configuration: a flat, line-oriented "key = value" file with optional
// [paths], [model], [vote] and [run] sections. '#' and ';' start comment
// lines. Relative paths are resolved against the config file's directory.
//
//   [run]
//   seed = 7
//
//   [paths]
//   train = train.tsv
//   embeddings = vectors.txt
//
//   [model]
//   max_length = 64
//   gru_hidden = 16
//
//   [vote]
//   order = xlnet,roberta,bert,bigrucnn
//   tie_break = priority

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "tweetinfo/checkpoint.hpp"
#include "tweetinfo/ensemble.hpp"
#include "tweetinfo/errors.hpp"
#include "tweetinfo/io.hpp"

namespace tweetinfo {

/// Environment variable naming the data/fixture root used to resolve
/// relative paths that do not exist relative to the working directory.
inline constexpr const char* kDataRootEnv = "TWEETINFO_DATA";

struct RunPaths {
  std::optional<std::filesystem::path> train;
  std::optional<std::filesystem::path> dev;
  std::optional<std::filesystem::path> test;
  std::optional<std::filesystem::path> embeddings;
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> predictions;
};

struct RunConfig {
  RunPaths paths;
  ModelConfig model;
  VoteConfig vote;
  /// Accept header rows and CRLF line endings in corpus files.
  bool lenient_corpus = false;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  for (auto f : io::split_fields(s, ',')) {
    f = trim(f);
    if (!f.empty()) out.emplace_back(f);
  }
  return out;
}

}  // namespace detail

/// Resolves a user-supplied path: as given if it exists, otherwise under
/// $TWEETINFO_DATA when that is set and the path is relative.
inline std::filesystem::path resolve_data_path(const std::filesystem::path& p) {
  if (p.is_absolute() || std::filesystem::exists(p)) return p;
  if (const char* root = std::getenv(kDataRootEnv); root != nullptr && *root != '\0') {
    auto candidate = std::filesystem::path(root) / p;
    if (std::filesystem::exists(candidate)) return candidate;
  }
  return p;
}

inline RunConfig parse_run_config(std::istream& in, const std::filesystem::path& base_dir = {},
                                  std::string_view source = "<config>") {
  RunConfig cfg;
  std::string section;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto where = std::string(source) + ":" + std::to_string(line_no);
    const auto s = detail::trim(line);
    if (s.empty() || s.front() == '#' || s.front() == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw DataError(where + ": malformed section header");
      section = std::string(detail::trim(s.substr(1, s.size() - 2)));
      if (section != "run" && section != "paths" && section != "model" && section != "vote") {
        throw DataError(where + ": unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) throw DataError(where + ": expected key = value");
    const auto key = detail::trim(s.substr(0, eq));
    const auto value = detail::trim(s.substr(eq + 1));

    try {
      if (section == "paths") {
        std::filesystem::path p{std::string(value)};
        // Relative paths are taken next to the config file when they exist
        // there; otherwise they stay relative for resolve_data_path().
        if (p.is_relative() && !base_dir.empty() && std::filesystem::exists(base_dir / p)) {
          p = base_dir / p;
        }
        if (key == "train") cfg.paths.train = p;
        else if (key == "dev") cfg.paths.dev = p;
        else if (key == "test") cfg.paths.test = p;
        else if (key == "embeddings") cfg.paths.embeddings = p;
        else if (key == "checkpoint") cfg.paths.checkpoint = p;
        else if (key == "predictions") cfg.paths.predictions = p;
        else throw DataError("unknown path key '" + std::string(key) + "'");
      } else if (section == "model") {
        detail::set_model_field(cfg.model, key, value);
      } else if (section == "vote") {
        if (key == "order") {
          cfg.vote.members = detail::split_list(value);
        } else if (key == "tie_break") {
          const auto t = parse_tie_break(value);
          if (!t) throw DataError("tie_break must be 'priority' or 'informative'");
          cfg.vote.tie_break = *t;
        } else {
          throw DataError("unknown vote key '" + std::string(key) + "'");
        }
      } else {
        if (key == "seed") cfg.model.seed = detail::parse_number<std::uint64_t>(value, key);
        else if (key == "lenient_corpus") cfg.lenient_corpus = value == "true" || value == "1";
        else throw DataError("unknown run key '" + std::string(key) + "'");
      }
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  auto in = io::open_input(path);
  return parse_run_config(in, path.parent_path(), path.string());
}

}  // namespace tweetinfo
