#include <gtest/gtest.h>

#include <sstream>

#include "test_util.hpp"
#include "tweetinfo/cli.hpp"

namespace tweetinfo {
namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string fx(const std::string& name) { return test::fixture(name).string(); }

TEST(Cli, NoArgumentsIsAUsageError) {
  const auto r = run({});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST(Cli, HelpSucceeds) { EXPECT_EQ(run({"--help"}).code, 0); }

TEST(Cli, UnknownSubcommandAndMissingOptions) {
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"vote", "--out", "x.tsv"}).code, 2);
  EXPECT_EQ(run({"stats"}).code, 2);
}

TEST(Cli, MissingFileIsADataError) {
  const auto r = run({"stats", "--train", "/nonexistent/train.tsv"});
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(r.err.rfind("error[data]: ", 0), 0u) << r.err;
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Cli, MalformedCorpusIsADataError) {
  test::TempDir dir("cli");
  io::write_file(dir / "bad.tsv", "1\tok\tINFORMATIVE\n2\tno label\n");
  const auto r = run({"stats", "--train", (dir / "bad.tsv").string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("bad.tsv:2"), std::string::npos) << r.err;
}

TEST(Cli, DivergingTrainingIsANumericError) {
  test::TempDir dir("cli");
  io::write_file(dir / "run.ini",
                 "[paths]\ntrain = " + fx("train.tsv") + "\nembeddings = " + fx("embeddings.txt") +
                     "\n[model]\nembedding_dim = 6\nmax_length = 16\nconv_filters = 8\ngru_hidden = 4\n"
                     "learning_rate = 1e308\nepochs = 3\nbatch_size = 4\ntrainable_embeddings = true\n");
  const auto r = run({"train", "--config", (dir / "run.ini").string(), "--out", (dir / "m.ckpt").string()});
  EXPECT_EQ(r.code, 4) << r.err;
  EXPECT_NE(r.err.find("error[numeric]: "), std::string::npos) << r.err;
  EXPECT_FALSE(std::filesystem::exists(dir / "m.ckpt"));
}

TEST(Cli, StatsOnTheFixture) {
  const auto r = run({"stats", "--train", fx("train.tsv"), "--dev", fx("dev.tsv")});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("train.INFORMATIVE=16\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("dev.UNINFORMATIVE=4\n"), std::string::npos);
  EXPECT_NE(r.out.find("total=40\n"), std::string::npos);
  EXPECT_EQ(r.out.find("official_match"), std::string::npos);
}

TEST(Cli, NormalizeMatchesGolden) {
  test::TempDir dir("cli");
  const auto out = dir / "norm.tsv";
  const auto r = run({"normalize", "--in", test::golden("reference_tweets.tsv").string(), "--out", out.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(io::read_file(out), io::read_file(test::golden("reference_tweets.normalized.tsv")));
}

TEST(Cli, VoteAndEvalOnMemberFiles) {
  test::TempDir dir("cli");
  const auto ens = dir / "ensemble.tsv";
  const auto v = run({"vote", "--pred", fx("members"), "--out", ens.string(), "--agreement",
                      (dir / "agree.txt").string()});
  EXPECT_EQ(v.code, 0) << v.err;
  EXPECT_NE(v.out.find("members=xlnet,roberta,bert\n"), std::string::npos) << v.out;
  EXPECT_NE(v.out.find("ties_broken=0\n"), std::string::npos) << v.out;

  // Each member errs on different ids, so the three-way vote is perfect.
  const auto e = run({"eval", "--pred", ens.string(), "--gold", fx("dev.tsv"), "--table", "--published"});
  EXPECT_EQ(e.code, 0) << e.err;
  EXPECT_NE(e.out.find("accuracy=1\n"), std::string::npos) << e.out;
  EXPECT_NE(e.out.find("BANANA (published)"), std::string::npos);

  const auto m = run({"eval", "--pred", fx("members/bert.tsv"), "--gold", fx("dev.tsv"),
                      "--report-errors", "5", "--confusion-csv", (dir / "c.csv").string()});
  EXPECT_EQ(m.code, 0) << m.err;
  EXPECT_NE(m.out.find("accuracy=0.75\n"), std::string::npos) << m.out;
  EXPECT_NE(m.out.find("\th05\t"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / "c.csv"));
}

TEST(Cli, VoteRejectsMismatchedUniverses) {
  test::TempDir dir("cli");
  io::write_file(dir / "a.tsv", "1\tINFORMATIVE\n2\tINFORMATIVE\n");
  io::write_file(dir / "b.tsv", "1\tINFORMATIVE\n3\tINFORMATIVE\n");
  const auto r = run({"vote", "--pred", (dir / "a.tsv").string(), (dir / "b.tsv").string(), "--out",
                      (dir / "e.tsv").string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("2, 3"), std::string::npos) << r.err;
}

TEST(Cli, TrainPredictVoteReport) {
  test::TempDir dir("cli");
  const auto ckpt = (dir / "model.ckpt").string();
  const auto t = run({"train", "--config", fx("config.ini"), "--out", ckpt, "--history",
                      (dir / "history.txt").string()});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_NE(t.out.find("best_epoch="), std::string::npos);
  EXPECT_NE(t.err.find("vocab_size="), std::string::npos);
  EXPECT_NE(t.err.find("epoch=15 "), std::string::npos);

  const auto preds = dir / "preds";
  const auto p = run({"predict", "--ckpt", ckpt, "--in", fx("dev.tsv"), "--out", (preds / "bigrucnn.tsv").string(),
                      "--proba", (dir / "proba.tsv").string()});
  ASSERT_EQ(p.code, 0) << p.err;
  EXPECT_EQ(p.out, "predictions=8\n");
  for (const char* m : {"xlnet", "roberta", "bert"})
    std::filesystem::copy_file(test::fixture(std::string("members/") + m + ".tsv"), preds / (std::string(m) + ".tsv"));

  const auto v = run({"vote", "--pred", preds.string(), "--config", fx("config.ini"), "--out",
                      (dir / "ensemble.tsv").string()});
  ASSERT_EQ(v.code, 0) << v.err;
  EXPECT_NE(v.out.find("members=xlnet,roberta,bert,bigrucnn\n"), std::string::npos) << v.out;

  std::filesystem::copy_file(dir / "ensemble.tsv", preds / "ensemble.tsv");
  const auto r = run({"report", "--pred", preds.string(), "--gold", fx("dev.tsv"), "--out-dir",
                      (dir / "report").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("model=ensemble\n"), std::string::npos);
  EXPECT_NE(r.out.find("unanimity="), std::string::npos);
  EXPECT_EQ(io::read_file(dir / "report" / "report.txt"), r.out);
  EXPECT_TRUE(std::filesystem::exists(dir / "report" / "bigrucnn_confusion.csv"));
}

TEST(Cli, TrainValidatesPathsBeforeLoading) {
  test::TempDir dir("cli");
  const auto r = run({"train", "--config", fx("config.ini"), "--dev", "/nonexistent/dev.tsv", "--out",
                      (dir / "m.ckpt").string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("dev file not found"), std::string::npos) << r.err;
  EXPECT_EQ(r.err.find("vocab_size"), std::string::npos);
}

}  // namespace
}  // namespace tweetinfo
