#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <string>
#include <string_view>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tweetinfo/corpus.hpp"
#include "tweetinfo/ensemble.hpp"
#include "tweetinfo/errors.hpp"
#include "tweetinfo/label.hpp"
#include "tweetinfo/published.hpp"

namespace tweetinfo {

/// Binary confusion counts with INFORMATIVE as the positive class.
struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }

  void add(Label predicted, Label truth) {
    const bool p = predicted == Label::kInformative;
    const bool t = truth == Label::kInformative;
    if (p && t) ++tp;
    else if (p) ++fp;
    else if (t) ++fn;
    else ++tn;
  }

  /// Same counts seen with UNINFORMATIVE as the positive class.
  ConfusionMatrix swapped() const { return {tn, fn, fp, tp}; }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct MetricsReport {
  std::string model_name;
  ConfusionMatrix matrix;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Zero denominators yield 0 for precision, recall and F1 (and accuracy on
/// an empty matrix).
inline MetricsReport report_from_matrix(std::string model_name, const ConfusionMatrix& m) {
  MetricsReport r{std::move(model_name), m};
  const auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  r.accuracy = ratio(m.tp + m.tn, m.total());
  r.precision = ratio(m.tp, m.tp + m.fp);
  r.recall = ratio(m.tp, m.tp + m.fn);
  const double pr = r.precision + r.recall;
  r.f1 = pr == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / pr;
  return r;
}

/// Scores `pred` against the labels of `gold`. Both must cover exactly the
/// same ids and every gold tweet must be labeled.
inline MetricsReport evaluate(const PredictionSet& pred, const std::vector<Tweet>& gold) {
  std::vector<std::string> missing;
  ConfusionMatrix m;
  for (const auto& t : gold) {
    if (!t.label) throw DataError("gold tweet '" + t.id + "' has no label");
    const auto p = pred.find(t.id);
    if (!p) {
      missing.push_back(t.id);
      continue;
    }
    m.add(*p, *t.label);
  }
  if (!missing.empty() || pred.size() != gold.size()) {
    std::unordered_set<std::string_view> gold_ids;
    for (const auto& t : gold) gold_ids.insert(t.id);
    for (const auto& [id, _] : pred.entries())
      if (!gold_ids.count(id)) missing.push_back(id);
    std::sort(missing.begin(), missing.end());
    throw DataError("predictions of '" + pred.model_name() + "' and gold labels cover different ids (" +
                    std::to_string(missing.size()) + "): " + detail::describe_ids(missing));
  }
  return report_from_matrix(pred.model_name(), m);
}

// ---------------------------------------------------------------------------
// Rendering

/// Percentage with two decimals, rounding half away from zero.
inline std::string format_percent(double fraction) {
  const long long hundredths = std::llround(fraction * 10000.0);
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s%lld.%02lld", hundredths < 0 ? "-" : "",
                std::llabs(hundredths) / 100, std::llabs(hundredths) % 100);
  return buf;
}

/// Shortest decimal that round-trips to the same double.
inline std::string format_exact(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

/// "metric=value" lines. Scores are fractions; *_pct are rounded percentages.
inline std::string render_metrics(const MetricsReport& r) {
  std::ostringstream os;
  os << "model=" << r.model_name << '\n';
  os << "accuracy=" << format_exact(r.accuracy) << '\n';
  os << "precision=" << format_exact(r.precision) << '\n';
  os << "recall=" << format_exact(r.recall) << '\n';
  os << "f1=" << format_exact(r.f1) << '\n';
  os << "accuracy_pct=" << format_percent(r.accuracy) << '\n';
  os << "precision_pct=" << format_percent(r.precision) << '\n';
  os << "recall_pct=" << format_percent(r.recall) << '\n';
  os << "f1_pct=" << format_percent(r.f1) << '\n';
  os << "tp=" << r.matrix.tp << '\n';
  os << "fp=" << r.matrix.fp << '\n';
  os << "fn=" << r.matrix.fn << '\n';
  os << "tn=" << r.matrix.tn << '\n';
  os << "total=" << r.matrix.total() << '\n';
  return os.str();
}

/// Rows are true labels, columns predicted labels.
inline std::string confusion_csv(const ConfusionMatrix& m) {
  std::ostringstream os;
  os << "true\\predicted,INFORMATIVE,UNINFORMATIVE\n";
  os << "INFORMATIVE," << m.tp << ',' << m.fn << '\n';
  os << "UNINFORMATIVE," << m.fp << ',' << m.tn << '\n';
  return os.str();
}

struct TableRow {
  std::string name;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool published = false;
};

inline TableRow to_row(const MetricsReport& r) {
  return {r.model_name, r.accuracy, r.precision, r.recall, r.f1, false};
}

inline TableRow to_row(const PublishedRow& p) {
  return {std::string(p.name) + " (published)", p.accuracy / 100.0, p.precision / 100.0,
          p.recall / 100.0, p.f1 / 100.0, true};
}

/// Fixed-width table sorted by F1 descending, ties by name.
inline std::string comparison_table(std::vector<TableRow> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const TableRow& a, const TableRow& b) {
    if (a.f1 != b.f1) return a.f1 > b.f1;
    return a.name < b.name;
  });
  std::size_t width = 5;
  for (const auto& r : rows) width = std::max(width, r.name.size());

  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s %9s %10s %7s %7s\n", static_cast<int>(width), "Model",
                "Accuracy", "Precision", "Recall", "F1");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-*s %9s %10s %7s %7s\n", static_cast<int>(width),
                  r.name.c_str(), format_percent(r.accuracy).c_str(),
                  format_percent(r.precision).c_str(), format_percent(r.recall).c_str(),
                  format_percent(r.f1).c_str());
    os << buf;
  }
  return os.str();
}

inline std::string comparison_table(const std::vector<MetricsReport>& reports,
                                    std::span<const PublishedRow> published = {}) {
  std::vector<TableRow> rows;
  for (const auto& r : reports) rows.push_back(to_row(r));
  for (const auto& p : published) rows.push_back(to_row(p));
  return comparison_table(std::move(rows));
}

// ---------------------------------------------------------------------------
// Error analysis

struct Misclassification {
  Tweet tweet;
  Label predicted;
  Label truth;
};

/// Up to `limit` wrong predictions per direction, in gold order: first true
/// INFORMATIVE predicted UNINFORMATIVE, then the reverse.
inline std::vector<Misclassification> misclassification_report(const PredictionSet& pred,
                                                               const std::vector<Tweet>& gold,
                                                               std::size_t limit) {
  std::vector<Misclassification> out;
  for (const Label truth : {Label::kInformative, Label::kUninformative}) {
    std::size_t taken = 0;
    for (const auto& t : gold) {
      if (taken >= limit) break;
      if (!t.label || *t.label != truth) continue;
      const auto p = pred.find(t.id);
      if (p && *p != truth) {
        out.push_back({t, *p, truth});
        ++taken;
      }
    }
  }
  return out;
}

/// "PL\tTL\tid\ttext" lines under a header.
inline std::string render_misclassifications(const std::vector<Misclassification>& errors) {
  std::string out = "PL\tTL\tid\ttext\n";
  for (const auto& e : errors) {
    out += short_tag(e.predicted);
    out += '\t';
    out += short_tag(e.truth);
    out += '\t';
    out += e.tweet.id;
    out += '\t';
    out += e.tweet.text;
    out += '\n';
  }
  return out;
}

}  // namespace tweetinfo
