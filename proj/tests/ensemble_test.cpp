#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "test_util.hpp"
#include "tweetinfo/ensemble.hpp"

namespace tweetinfo {
namespace {

constexpr Label IN = Label::kInformative;
constexpr Label UN = Label::kUninformative;

PredictionSet make_set(const std::string& name, const std::vector<Label>& labels) {
  PredictionSet s(name);
  for (std::size_t i = 0; i < labels.size(); ++i) s.add("id" + std::to_string(i), labels[i]);
  return s;
}

VoteConfig config_for(const std::vector<PredictionSet>& sets, TieBreak tb = TieBreak::kPriority) {
  VoteConfig c;
  c.members.clear();
  for (const auto& s : sets) c.members.push_back(s.model_name());
  c.tie_break = tb;
  return c;
}

// Hand-written oracle: counts votes and applies the tie rule by reading the
// first member's label.
Label oracle(const std::vector<Label>& votes, TieBreak tb) {
  int in = 0;
  for (auto v : votes) in += v == IN ? 1 : -1;
  if (in > 0) return IN;
  if (in < 0) return UN;
  return tb == TieBreak::kInformative ? IN : votes.front();
}

TEST(Vote, ExhaustiveFourMemberPatterns) {
  for (const auto tb : {TieBreak::kPriority, TieBreak::kInformative}) {
    std::vector<PredictionSet> sets;
    const std::vector<std::string> names{"xlnet", "roberta", "bert", "bigrucnn"};
    for (std::size_t m = 0; m < 4; ++m) {
      std::vector<Label> labels;
      for (unsigned pattern = 0; pattern < 16; ++pattern) labels.push_back((pattern >> m) & 1 ? IN : UN);
      sets.push_back(make_set(names[m], labels));
    }
    const auto result = vote_with_stats(sets, config_for(sets, tb));
    std::size_t ties = 0;
    for (unsigned pattern = 0; pattern < 16; ++pattern) {
      std::vector<Label> votes;
      for (std::size_t m = 0; m < 4; ++m) votes.push_back((pattern >> m) & 1 ? IN : UN);
      if (std::count(votes.begin(), votes.end(), IN) == 2) ++ties;
      EXPECT_EQ(result.predictions.entries()[pattern].second, oracle(votes, tb)) << pattern;
    }
    EXPECT_EQ(result.ties_broken, ties);
    EXPECT_EQ(ties, 6u);
  }
}

TEST(Vote, OddMemberCountsNeverTie) {
  for (std::size_t members : {3u, 5u}) {
    std::vector<PredictionSet> sets;
    const unsigned patterns = 1u << members;
    for (std::size_t m = 0; m < members; ++m) {
      std::vector<Label> labels;
      for (unsigned p = 0; p < patterns; ++p) labels.push_back((p >> m) & 1 ? IN : UN);
      sets.push_back(make_set("m" + std::to_string(m), labels));
    }
    const auto result = vote_with_stats(sets, config_for(sets));
    EXPECT_EQ(result.ties_broken, 0u);
    for (unsigned p = 0; p < patterns; ++p) {
      const auto in = static_cast<std::size_t>(std::popcount(p));
      EXPECT_EQ(result.predictions.entries()[p].second, 2 * in > members ? IN : UN);
    }
  }
}

TEST(Vote, TieGoesToTheHighestPriorityMember) {
  const std::vector<PredictionSet> sets{make_set("xlnet", {UN}), make_set("roberta", {IN}),
                                        make_set("bert", {IN}), make_set("bigrucnn", {UN})};
  VoteConfig c;
  EXPECT_EQ(vote(sets, c).entries()[0].second, UN);
  c.members = {"roberta", "xlnet", "bert", "bigrucnn"};
  EXPECT_EQ(vote(sets, c).entries()[0].second, IN);
  c.tie_break = TieBreak::kInformative;
  c.members = default_member_priority();
  EXPECT_EQ(vote(sets, c).entries()[0].second, IN);
}

TEST(Vote, InvariantToArgumentOrderAndIdOrder) {
  std::mt19937_64 rng(12);
  std::vector<PredictionSet> sets;
  for (const auto& name : default_member_priority()) {
    PredictionSet s(name);
    for (int i = 0; i < 60; ++i) s.add("t" + std::to_string(i), rng() % 2 ? IN : UN);
    sets.push_back(s);
  }
  const VoteConfig c;
  const auto base = vote(sets, c);
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(sets.begin(), sets.end(), rng);
    std::vector<PredictionSet> reordered;
    for (const auto& s : sets) {
      auto entries = s.entries();
      std::shuffle(entries.begin(), entries.end(), rng);
      PredictionSet r(s.model_name());
      for (const auto& [id, l] : entries) r.add(id, l);
      reordered.push_back(r);
    }
    const auto out = vote(reordered, c);
    for (const auto& [id, l] : base.entries()) EXPECT_EQ(out.find(id), l) << id;
  }
}

TEST(Vote, UnanimousInputIsReturnedUnchanged) {
  std::mt19937_64 rng(2);
  std::vector<Label> labels;
  for (int i = 0; i < 30; ++i) labels.push_back(rng() % 2 ? IN : UN);
  std::vector<PredictionSet> sets;
  for (const auto& n : default_member_priority()) sets.push_back(make_set(n, labels));
  const auto r = vote_with_stats(sets, VoteConfig{});
  EXPECT_EQ(r.predictions.entries(), sets[0].entries());
  EXPECT_EQ(r.ties_broken, 0u);
  EXPECT_EQ(r.predictions.model_name(), "ensemble");
}

TEST(Vote, IdUniverseMismatchListsTheDifference) {
  auto a = make_set("a", {IN, UN, IN});
  PredictionSet b("b");
  b.add("id0", IN);
  b.add("id1", UN);
  b.add("zzz", UN);
  const std::vector<PredictionSet> sets{a, b};
  try {
    vote(sets, config_for(sets));
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("(2 ids): id2, zzz"), std::string::npos) << msg;
  }
}

TEST(Vote, UsageErrors) {
  const auto a = make_set("a", {IN});
  const std::vector<PredictionSet> one{a};
  EXPECT_THROW(vote(one, config_for(one)), UsageError);
  const std::vector<PredictionSet> two{a, make_set("b", {IN})};
  VoteConfig c;
  c.members = {"a", "c"};
  EXPECT_THROW(vote(two, c), UsageError);
  c.members = {"a", "a"};
  EXPECT_THROW(vote(two, c), UsageError);
  c.members = {"a", "b", "c"};
  EXPECT_THROW(vote(two, c), UsageError);
}

TEST(PredictionFiles, RoundTripAndErrors) {
  const auto s = make_set("x", {IN, UN, UN});
  std::istringstream in(format_predictions(s));
  EXPECT_EQ(load_predictions(in, "x"), s);

  const auto bad = [](const std::string& text) {
    std::istringstream is(text);
    EXPECT_THROW(load_predictions(is, "m", "mem"), DataError) << text;
  };
  bad("a\tINFORMATIVE\na\tUNINFORMATIVE\n");
  bad("a\tMAYBE\n");
  bad("a\tINFORMATIVE\textra\n");
  bad("\tINFORMATIVE\n");
}

TEST(PredictionFiles, ModelNameIsTheFileStem) {
  const auto s = load_predictions(test::fixture("members/roberta.tsv"));
  EXPECT_EQ(s.model_name(), "roberta");
  EXPECT_EQ(s.size(), 8u);
}

TEST(Agreement, IdenticalComplementaryAndMixed) {
  const auto a = make_set("a", {IN, UN, IN, UN});
  const auto not_a = make_set("b", {UN, IN, UN, IN});
  const auto c = make_set("c", {IN, IN, IN, UN});

  const std::vector<PredictionSet> same{a, a};
  EXPECT_EQ(agreement_report(same).pairs[0].rate, 1.0);
  EXPECT_EQ(agreement_report(same).unanimity, 1.0);

  const std::vector<PredictionSet> opposite{a, not_a};
  EXPECT_EQ(agreement_report(opposite).pairs[0].rate, 0.0);

  const std::vector<PredictionSet> three{a, not_a, c};
  const auto r = agreement_report(three);
  ASSERT_EQ(r.pairs.size(), 3u);
  EXPECT_EQ(r.pairs[1].first, "a");
  EXPECT_EQ(r.pairs[1].second, "c");
  EXPECT_DOUBLE_EQ(r.pairs[1].rate, 0.75);
  EXPECT_DOUBLE_EQ(r.pairs[2].rate, 0.25);
  EXPECT_EQ(r.unanimity, 0.0);
  EXPECT_NE(render_agreement(r).find("agreement.a.c=0.750000\n"), std::string::npos);
}

TEST(Agreement, EmptyUniverse) {
  const std::vector<PredictionSet> sets{PredictionSet("a"), PredictionSet("b")};
  EXPECT_EQ(agreement_report(sets).unanimity, 1.0);
  EXPECT_TRUE(vote(sets, config_for(sets)).empty());
}

}  // namespace
}  // namespace tweetinfo
