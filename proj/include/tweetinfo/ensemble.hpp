#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <istream>
#include <optional>
#include <set>
#include <sstream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tweetinfo/errors.hpp"
#include "tweetinfo/io.hpp"
#include "tweetinfo/label.hpp"

namespace tweetinfo {

/// Hard-label predictions of one model, in insertion (file) order.
class PredictionSet {
 public:
  PredictionSet() = default;
  explicit PredictionSet(std::string model_name) : model_name_(std::move(model_name)) {}

  const std::string& model_name() const { return model_name_; }
  void set_model_name(std::string name) { model_name_ = std::move(name); }

  /// Throws DataError on a repeated id.
  void add(std::string id, Label label) {
    if (!index_.emplace(id, entries_.size()).second) {
      throw DataError("prediction set '" + model_name_ + "': duplicate id '" + id + "'");
    }
    entries_.emplace_back(std::move(id), label);
  }

  std::optional<Label> find(std::string_view id) const {
    const auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return entries_[it->second].second;
  }

  bool contains(std::string_view id) const { return index_.count(std::string(id)) != 0; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<std::pair<std::string, Label>>& entries() const { return entries_; }

  friend bool operator==(const PredictionSet& a, const PredictionSet& b) {
    return a.model_name_ == b.model_name_ && a.entries_ == b.entries_;
  }

 private:
  std::string model_name_;
  std::vector<std::pair<std::string, Label>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Prediction files: one "id\tLABEL" line per tweet.

inline PredictionSet load_predictions(std::istream& in, std::string model_name,
                                      std::string_view source = "<stream>") {
  PredictionSet set(std::move(model_name));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto where = std::string(source) + ":" + std::to_string(line_no);
    const auto fields = io::split_fields(line);
    if (fields.size() != 2 || fields[0].empty()) {
      throw DataError(where + ": malformed prediction line: expected \"id\\tLABEL\"");
    }
    const auto label = parse_label(fields[1]);
    if (!label) throw DataError(where + ": unknown label '" + std::string(fields[1]) + "'");
    if (set.contains(fields[0])) {
      throw DataError(where + ": duplicate id '" + std::string(fields[0]) + "'");
    }
    set.add(std::string(fields[0]), *label);
  }
  return set;
}

/// The model name is the file stem ("preds/xlnet.tsv" -> "xlnet").
inline PredictionSet load_predictions(const std::filesystem::path& path) {
  auto in = io::open_input(path);
  return load_predictions(in, path.stem().string(), path.string());
}

inline std::string format_predictions(const PredictionSet& set) {
  std::string out;
  for (const auto& [id, label] : set.entries()) {
    out += id;
    out += '\t';
    out += to_wire(label);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Majority vote

enum class TieBreak {
  /// 2-2 style splits go to the first member in the configured order.
  kPriority,
  /// Splits go to INFORMATIVE.
  kInformative,
};

inline std::optional<TieBreak> parse_tie_break(std::string_view s) {
  if (s == "priority") return TieBreak::kPriority;
  if (s == "informative") return TieBreak::kInformative;
  return std::nullopt;
}

inline std::string_view to_string(TieBreak t) {
  return t == TieBreak::kPriority ? "priority" : "informative";
}

/// Descending single-model dev F1 of the four reference members.
inline const std::vector<std::string>& default_member_priority() {
  static const std::vector<std::string> order{"xlnet", "roberta", "bert", "bigrucnn"};
  return order;
}

struct VoteConfig {
  std::vector<std::string> members = default_member_priority();
  TieBreak tie_break = TieBreak::kPriority;

  void validate() const {
    if (members.size() < 2) throw UsageError("vote needs at least 2 members");
    std::set<std::string_view> unique(members.begin(), members.end());
    if (unique.size() != members.size()) throw UsageError("vote member names must be unique");
  }
};

struct VoteDecision {
  Label label;
  bool tie_broken = false;
};

/// Decides one id. `votes` is ordered by member priority.
inline VoteDecision decide(std::span<const Label> votes, TieBreak tie_break) {
  const auto informative = static_cast<std::size_t>(
      std::count(votes.begin(), votes.end(), Label::kInformative));
  const auto uninformative = votes.size() - informative;
  if (informative > uninformative) return {Label::kInformative, false};
  if (uninformative > informative) return {Label::kUninformative, false};
  if (tie_break == TieBreak::kInformative || votes.empty()) return {Label::kInformative, true};
  return {votes.front(), true};
}

namespace detail {

inline std::string describe_ids(const std::vector<std::string>& ids, std::size_t limit = 20) {
  std::string out;
  for (std::size_t i = 0; i < ids.size() && i < limit; ++i) {
    if (i) out += ", ";
    out += ids[i];
  }
  if (ids.size() > limit) out += ", ... (" + std::to_string(ids.size() - limit) + " more)";
  return out;
}

}  // namespace detail

/// Throws DataError listing the symmetric difference when any set covers a
/// different id universe than the first.
inline void require_same_ids(std::span<const PredictionSet> sets) {
  if (sets.empty()) return;
  const auto& ref = sets.front();
  for (const auto& other : sets.subspan(1)) {
    std::vector<std::string> diff;
    for (const auto& [id, _] : ref.entries())
      if (!other.contains(id)) diff.push_back(id);
    for (const auto& [id, _] : other.entries())
      if (!ref.contains(id)) diff.push_back(id);
    if (!diff.empty()) {
      std::sort(diff.begin(), diff.end());
      throw DataError("id universes of '" + ref.model_name() + "' and '" + other.model_name() +
                      "' differ; symmetric difference (" + std::to_string(diff.size()) +
                      " ids): " + detail::describe_ids(diff));
    }
  }
}

struct VoteResult {
  PredictionSet predictions{"ensemble"};
  std::size_t ties_broken = 0;
};

/// Majority vote over hard labels. Every set must be named in
/// `config.members` and all sets must share one id universe. Output ids
/// follow the order of `sets.front()`.
inline VoteResult vote_with_stats(std::span<const PredictionSet> sets, const VoteConfig& config) {
  if (sets.size() < 2) throw UsageError("vote needs at least 2 prediction sets");
  config.validate();
  if (sets.size() != config.members.size()) {
    throw UsageError("vote order names " + std::to_string(config.members.size()) +
                     " members but " + std::to_string(sets.size()) + " prediction sets were given");
  }

  std::vector<const PredictionSet*> ordered;
  for (const auto& name : config.members) {
    const auto it = std::find_if(sets.begin(), sets.end(),
                                 [&](const PredictionSet& s) { return s.model_name() == name; });
    if (it == sets.end()) throw UsageError("no prediction set named '" + name + "'");
    ordered.push_back(&*it);
  }
  require_same_ids(sets);

  VoteResult result;
  std::vector<Label> votes(ordered.size());
  for (const auto& [id, _] : sets.front().entries()) {
    for (std::size_t m = 0; m < ordered.size(); ++m) votes[m] = *ordered[m]->find(id);
    const auto d = decide(votes, config.tie_break);
    if (d.tie_broken) ++result.ties_broken;
    result.predictions.add(id, d.label);
  }
  return result;
}

inline PredictionSet vote(std::span<const PredictionSet> sets, const VoteConfig& config) {
  return vote_with_stats(sets, config).predictions;
}

// ---------------------------------------------------------------------------
// Agreement diagnostics

struct PairAgreement {
  std::string first;
  std::string second;
  double rate = 1.0;
};

struct AgreementReport {
  std::vector<PairAgreement> pairs;
  double unanimity = 1.0;
  std::size_t ids = 0;
};

/// Pairwise label agreement and the fraction of ids on which every member
/// agrees. Rates over an empty id universe are 1.0.
inline AgreementReport agreement_report(std::span<const PredictionSet> sets) {
  if (sets.size() < 2) throw UsageError("agreement report needs at least 2 prediction sets");
  require_same_ids(sets);
  AgreementReport report;
  const auto& ref = sets.front();
  report.ids = ref.size();
  const auto n = static_cast<double>(ref.size());

  for (std::size_t a = 0; a < sets.size(); ++a) {
    for (std::size_t b = a + 1; b < sets.size(); ++b) {
      std::size_t same = 0;
      for (const auto& [id, label] : sets[a].entries())
        if (*sets[b].find(id) == label) ++same;
      report.pairs.push_back({sets[a].model_name(), sets[b].model_name(),
                              ref.empty() ? 1.0 : static_cast<double>(same) / n});
    }
  }

  std::size_t unanimous = 0;
  for (const auto& [id, label] : ref.entries()) {
    bool all = true;
    for (const auto& s : sets.subspan(1)) all = all && *s.find(id) == label;
    if (all) ++unanimous;
  }
  report.unanimity = ref.empty() ? 1.0 : static_cast<double>(unanimous) / n;
  return report;
}

inline std::string render_agreement(const AgreementReport& report) {
  std::ostringstream os;
  char buf[64];
  for (const auto& p : report.pairs) {
    std::snprintf(buf, sizeof buf, "%.6f", p.rate);
    os << "agreement." << p.first << "." << p.second << "=" << buf << '\n';
  }
  std::snprintf(buf, sizeof buf, "%.6f", report.unanimity);
  os << "unanimity=" << buf << '\n';
  return os.str();
}

}  // namespace tweetinfo
