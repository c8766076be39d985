#pragma once

// Subcommand dispatcher behind the `tweetinfo` binary. Kept in a header so
// tests can drive the whole pipeline in-process through run().
//
// Exit codes: 0 ok, 2 usage, 3 data error, 4 numeric failure, 1 anything
// else. Failures print one line "error[<category>]: <message>" to `err`.

#include <algorithm>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <typeinfo>
#include <vector>

#include <CLI11.hpp>

#include "tweetinfo/bigrucnn.hpp"
#include "tweetinfo/checkpoint.hpp"
#include "tweetinfo/config.hpp"
#include "tweetinfo/corpus.hpp"
#include "tweetinfo/embeddings.hpp"
#include "tweetinfo/ensemble.hpp"
#include "tweetinfo/errors.hpp"
#include "tweetinfo/io.hpp"
#include "tweetinfo/metrics.hpp"
#include "tweetinfo/preprocess.hpp"
#include "tweetinfo/published.hpp"

namespace tweetinfo::cli {

namespace fs = std::filesystem;

/// Model scalar used by the command-line tools.
using CliScalar = double;

namespace detail {

inline fs::path require_file(const std::optional<fs::path>& p, std::string_view what) {
  if (!p) throw UsageError("missing " + std::string(what) + " path");
  auto resolved = resolve_data_path(*p);
  if (!fs::is_regular_file(resolved)) {
    throw DataError(std::string(what) + " file not found: " + p->string());
  }
  return resolved;
}

inline void emit(std::ostream& out, const std::optional<fs::path>& path, const std::string& text) {
  if (path) {
    io::write_file(*path, text);
  } else {
    out << text;
  }
}

/// Expands directories to their *.tsv files (sorted by name).
inline std::vector<fs::path> expand_prediction_paths(const std::vector<std::string>& args) {
  std::vector<fs::path> files;
  for (const auto& a : args) {
    const auto p = resolve_data_path(a);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p))
        if (e.is_regular_file() && e.path().extension() == ".tsv") found.push_back(e.path());
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::is_regular_file(p)) {
      files.push_back(p);
    } else {
      throw DataError("prediction file or directory not found: " + a);
    }
  }
  return files;
}

inline std::vector<PredictionSet> load_prediction_sets(const std::vector<std::string>& args) {
  std::vector<PredictionSet> sets;
  std::set<std::string> names;
  for (const auto& f : expand_prediction_paths(args)) {
    auto s = load_predictions(f);
    if (!names.insert(s.model_name()).second) {
      throw UsageError("two prediction files share the model name '" + s.model_name() + "'");
    }
    sets.push_back(std::move(s));
  }
  return sets;
}

/// Default member order: the reference priority for the names it knows,
/// then everything else alphabetically.
inline std::vector<std::string> default_order(const std::vector<PredictionSet>& sets) {
  std::vector<std::string> order;
  std::set<std::string> present;
  for (const auto& s : sets) present.insert(s.model_name());
  for (const auto& name : default_member_priority())
    if (present.erase(name)) order.push_back(name);
  order.insert(order.end(), present.begin(), present.end());
  return order;
}

inline std::vector<Tweet> load_gold(const std::string& path, bool lenient) {
  return load_split(require_file(fs::path(path), "gold"), true, lenient);
}

}  // namespace detail

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Informative COVID-19 tweet identification toolkit", "tweetinfo"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Verbose diagnostics");

  // stats
  auto* stats = app.add_subcommand("stats", "Label counts per split");
  std::optional<std::string> stats_train, stats_dev, stats_test;
  bool stats_lenient = false;
  stats->add_option("--train", stats_train, "Training split TSV");
  stats->add_option("--dev", stats_dev, "Development split TSV");
  stats->add_option("--test", stats_test, "Test split TSV");
  stats->add_flag("--lenient", stats_lenient, "Accept a header row and CRLF line endings");

  // normalize
  auto* norm = app.add_subcommand("normalize", "Rewrite tweet texts through the normalizer");
  std::string norm_in;
  std::optional<std::string> norm_out;
  bool norm_lenient = false;
  norm->add_option("--in", norm_in, "Input TSV")->required();
  norm->add_option("--out", norm_out, "Output TSV (default: stdout)");
  norm->add_flag("--lenient", norm_lenient, "Accept a header row and CRLF line endings");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the Bi-GRU-CNN classifier");
  std::optional<std::string> tr_config, tr_train, tr_dev, tr_embeddings, tr_history;
  std::optional<std::uint64_t> tr_seed;
  std::string tr_out;
  train_cmd->add_option("--config", tr_config, "Run configuration file");
  train_cmd->add_option("--train", tr_train, "Training split TSV");
  train_cmd->add_option("--dev", tr_dev, "Development split TSV");
  train_cmd->add_option("--embeddings", tr_embeddings, "Word vectors (GloVe text format)");
  train_cmd->add_option("--seed", tr_seed, "Override the configured seed");
  train_cmd->add_option("--history", tr_history, "Write per-epoch metrics here");
  train_cmd->add_option("--out", tr_out, "Checkpoint to write")->required();

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "Label tweets with a trained checkpoint");
  std::string pr_ckpt, pr_in, pr_out;
  std::optional<std::string> pr_proba;
  bool pr_lenient = false;
  predict_cmd->add_option("--ckpt", pr_ckpt, "Checkpoint file")->required();
  predict_cmd->add_option("--in", pr_in, "Input TSV (labels optional)")->required();
  predict_cmd->add_option("--out", pr_out, "Prediction file to write")->required();
  predict_cmd->add_option("--proba", pr_proba, "Also write id<TAB>probability lines here");
  predict_cmd->add_flag("--lenient", pr_lenient, "Accept a header row and CRLF line endings");

  // vote
  auto* vote_cmd = app.add_subcommand("vote", "Majority vote over prediction files");
  std::vector<std::string> vo_pred;
  std::optional<std::string> vo_order, vo_tie, vo_config, vo_agreement;
  std::string vo_out;
  vote_cmd->add_option("--pred", vo_pred, "Prediction files and/or directories")->required();
  vote_cmd->add_option("--order", vo_order, "Comma-separated member priority order");
  vote_cmd->add_option("--tie-break", vo_tie, "priority (default) or informative");
  vote_cmd->add_option("--config", vo_config, "Run configuration file ([vote] section)");
  vote_cmd->add_option("--agreement", vo_agreement, "Write the member agreement report here");
  vote_cmd->add_option("--out", vo_out, "Ensemble prediction file to write")->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Score prediction files against gold labels");
  std::vector<std::string> ev_pred;
  std::string ev_gold;
  std::size_t ev_errors = 0;
  bool ev_table = false, ev_published = false, ev_lenient = false;
  std::optional<std::string> ev_csv;
  eval_cmd->add_option("--pred", ev_pred, "Prediction file(s)")->required();
  eval_cmd->add_option("--gold", ev_gold, "Labeled TSV")->required();
  eval_cmd->add_option("--report-errors", ev_errors, "List up to N errors per direction");
  eval_cmd->add_flag("--table", ev_table, "Print a comparison table");
  eval_cmd->add_flag("--published", ev_published, "Merge published reference rows into the table");
  eval_cmd->add_option("--confusion-csv", ev_csv, "Write the confusion matrix CSV here");
  eval_cmd->add_flag("--lenient", ev_lenient, "Accept a header row and CRLF line endings");

  // report
  auto* report_cmd = app.add_subcommand("report", "Full evaluation report for several models");
  std::vector<std::string> rp_pred;
  std::string rp_gold;
  std::size_t rp_errors = 3;
  bool rp_published = false, rp_lenient = false;
  std::optional<std::string> rp_out_dir;
  report_cmd->add_option("--pred", rp_pred, "Prediction files and/or directories")->required();
  report_cmd->add_option("--gold", rp_gold, "Labeled TSV")->required();
  report_cmd->add_option("--errors", rp_errors, "Misclassified examples per direction");
  report_cmd->add_flag("--published", rp_published, "Merge published reference rows");
  report_cmd->add_option("--out-dir", rp_out_dir, "Also write report.txt and confusion CSVs here");
  report_cmd->add_flag("--lenient", rp_lenient, "Accept a header row and CRLF line endings");

  std::vector<const char*> argv{"tweetinfo"};
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
      app.exit(e, out, err);
      err << app.help();
      return static_cast<int>(ErrorCategory::kUsage);
    }

    if (stats->parsed()) {
      std::vector<NamedSplit> splits;
      for (const auto& [name, path] : {std::pair{"train", &stats_train}, std::pair{"dev", &stats_dev},
                                       std::pair{"test", &stats_test}}) {
        if (!*path) continue;
        splits.emplace_back(name, load_split(detail::require_file(fs::path(**path), name), true,
                                             stats_lenient));
      }
      if (splits.empty()) throw UsageError("stats needs at least one of --train, --dev, --test");
      const auto s = summarize(splits);
      out << render_stats(s);
      if (splits.size() == 3) {
        bool match = true;
        for (const auto& ref : official_split_counts()) {
          const auto* got = s.find(ref.split);
          match = match && got && *got == ref;
        }
        out << "official_match=" << (match ? "true" : "false") << '\n';
      }
    } else if (norm->parsed()) {
      auto tweets = load_split(detail::require_file(fs::path(norm_in), "input"), false, norm_lenient);
      for (auto& t : tweets) t.text = normalize(t.text);
      detail::emit(out, norm_out ? std::optional<fs::path>(*norm_out) : std::nullopt,
                   format_split(tweets));
    } else if (train_cmd->parsed()) {
      RunConfig cfg;
      if (tr_config) cfg = load_run_config(detail::require_file(fs::path(*tr_config), "config"));
      if (tr_train) cfg.paths.train = *tr_train;
      if (tr_dev) cfg.paths.dev = *tr_dev;
      if (tr_embeddings) cfg.paths.embeddings = *tr_embeddings;
      if (tr_seed) cfg.model.seed = *tr_seed;
      cfg.model.validate();

      // Validate every input before any loading or training.
      const auto train_path = detail::require_file(cfg.paths.train, "train");
      const auto emb_path = detail::require_file(cfg.paths.embeddings, "embeddings");
      std::optional<fs::path> dev_path, test_path;
      if (cfg.paths.dev) dev_path = detail::require_file(cfg.paths.dev, "dev");
      if (cfg.paths.test) test_path = detail::require_file(cfg.paths.test, "test");

      const auto train_tweets = load_split(train_path, true, cfg.lenient_corpus);
      const auto dev_tweets =
          dev_path ? load_split(*dev_path, true, cfg.lenient_corpus) : std::vector<Tweet>{};
      auto vocab_tweets = train_tweets;
      vocab_tweets.insert(vocab_tweets.end(), dev_tweets.begin(), dev_tweets.end());
      if (test_path) {
        const auto test_tweets = load_split(*test_path, false, cfg.lenient_corpus);
        vocab_tweets.insert(vocab_tweets.end(), test_tweets.begin(), test_tweets.end());
      }

      const auto table = restrict_to_corpus(load_vectors(emb_path, cfg.model.embedding_dim),
                                            corpus_tokens(vocab_tweets));
      const auto train_set = make_examples(train_tweets, table.vocab(), cfg.model.max_length);
      const auto dev_set = make_examples(dev_tweets, table.vocab(), cfg.model.max_length);

      std::size_t tokens = 0, unknown = 0;
      for (const auto& e : train_set) {
        tokens += e.sequence.length();
        unknown += e.sequence.unknown_count;
      }
      char buf[160];
      std::snprintf(buf, sizeof buf, "vocab_size=%zu train_oov_rate=%.4f\n", table.size(),
                    tokens ? static_cast<double>(unknown) / static_cast<double>(tokens) : 0.0);
      err << buf;

      std::string history;
      const auto on_epoch = [&](const EpochMetrics& m) {
        std::string line = "epoch=" + std::to_string(m.epoch) +
                           " train_loss=" + format_exact(m.train_loss) +
                           " train_accuracy=" + format_exact(m.train_accuracy);
        if (m.dev_f1) {
          line += " dev_f1=" + format_exact(*m.dev_f1) + " dev_accuracy=" + format_exact(*m.dev_accuracy);
        }
        err << line << '\n';
        history += line + '\n';
      };
      const auto result = train<CliScalar>(cfg.model, table, train_set, dev_set, on_epoch);
      save_checkpoint(result.state, fs::path(tr_out));
      if (tr_history) io::write_file(*tr_history, history);
      out << "best_epoch=" << result.best_epoch << '\n';
      out << "checkpoint=" << tr_out << '\n';
    } else if (predict_cmd->parsed()) {
      const auto state = load_checkpoint<CliScalar>(detail::require_file(fs::path(pr_ckpt), "checkpoint"));
      const auto tweets = load_split(detail::require_file(fs::path(pr_in), "input"), false, pr_lenient);
      const auto scored = predict_scored(state, tweets);
      PredictionSet set(fs::path(pr_out).stem().string());
      std::string proba;
      for (const auto& p : scored) {
        set.add(p.id, p.label);
        proba += p.id + "\t" + format_exact(p.probability) + "\n";
      }
      io::write_file(pr_out, format_predictions(set));
      if (pr_proba) io::write_file(*pr_proba, proba);
      out << "predictions=" << set.size() << '\n';
    } else if (vote_cmd->parsed()) {
      RunConfig cfg;
      if (vo_config) cfg = load_run_config(detail::require_file(fs::path(*vo_config), "config"));
      const auto sets = detail::load_prediction_sets(vo_pred);
      VoteConfig vc = cfg.vote;
      if (vo_order) {
        vc.members = tweetinfo::detail::split_list(*vo_order);
      } else if (!vo_config) {
        vc.members = detail::default_order(sets);
      }
      if (vo_tie) {
        const auto t = parse_tie_break(*vo_tie);
        if (!t) throw UsageError("--tie-break must be 'priority' or 'informative'");
        vc.tie_break = *t;
      }
      const auto result = vote_with_stats(sets, vc);
      io::write_file(vo_out, format_predictions(result.predictions));
      if (vo_agreement) io::write_file(*vo_agreement, render_agreement(agreement_report(sets)));
      out << "members=";
      for (std::size_t i = 0; i < vc.members.size(); ++i) out << (i ? "," : "") << vc.members[i];
      out << "\npredictions=" << result.predictions.size() << "\nties_broken=" << result.ties_broken
          << "\ntie_break=" << to_string(vc.tie_break) << '\n';
    } else if (eval_cmd->parsed()) {
      const auto gold = detail::load_gold(ev_gold, ev_lenient);
      std::vector<MetricsReport> reports;
      for (const auto& f : ev_pred) {
        const auto pred = load_predictions(detail::require_file(fs::path(f), "prediction"));
        reports.push_back(evaluate(pred, gold));
        out << render_metrics(reports.back());
        if (ev_errors > 0) out << render_misclassifications(misclassification_report(pred, gold, ev_errors));
      }
      if (ev_csv) {
        if (reports.size() != 1) throw UsageError("--confusion-csv needs exactly one prediction file");
        io::write_file(*ev_csv, confusion_csv(reports.front().matrix));
      }
      if (ev_table) {
        out << '\n'
            << comparison_table(reports, ev_published ? std::span<const PublishedRow>(kPublishedTestRows)
                                                      : std::span<const PublishedRow>());
      }
    } else if (report_cmd->parsed()) {
      const auto gold = detail::load_gold(rp_gold, rp_lenient);
      const auto sets = detail::load_prediction_sets(rp_pred);
      if (sets.empty()) throw UsageError("report needs at least one prediction file");
      std::ostringstream text;
      std::vector<MetricsReport> reports;
      for (const auto& s : sets) reports.push_back(evaluate(s, gold));

      std::vector<TableRow> rows;
      for (const auto& r : reports) rows.push_back(to_row(r));
      if (rp_published) {
        for (const auto& p : kPublishedDevRows) rows.push_back(to_row(p));
      }
      text << comparison_table(std::move(rows)) << '\n';
      for (const auto& r : reports) text << render_metrics(r) << '\n';
      if (sets.size() >= 2) text << render_agreement(agreement_report(sets)) << '\n';
      for (std::size_t i = 0; i < sets.size(); ++i) {
        text << "[" << sets[i].model_name() << " misclassified]\n"
             << render_misclassifications(misclassification_report(sets[i], gold, rp_errors)) << '\n';
      }
      out << text.str();
      if (rp_out_dir) {
        const fs::path dir(*rp_out_dir);
        io::write_file(dir / "report.txt", text.str());
        for (const auto& r : reports) io::write_file(dir / (r.model_name + "_confusion.csv"), confusion_csv(r.matrix));
      }
    }
    return 0;
  } catch (const Error& e) {
    err << "error[" << category_name(e.category()) << "]: " << e.what() << '\n';
    if (verbose) err << "  (exception type " << typeid(e).name() << ")\n";
    return static_cast<int>(e.category());
  } catch (const fs::filesystem_error& e) {
    err << "error[data]: " << e.what() << '\n';
    return static_cast<int>(ErrorCategory::kData);
  } catch (const std::exception& e) {
    err << "error[internal]: " << e.what() << '\n';
    if (verbose) err << "  (exception type " << typeid(e).name() << ")\n";
    return 1;
  }
}

}  // namespace tweetinfo::cli
