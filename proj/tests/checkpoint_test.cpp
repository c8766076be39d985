#include <gtest/gtest.h>

#include <sstream>

#include "test_util.hpp"
#include "tweetinfo/checkpoint.hpp"

namespace tweetinfo {
namespace {

ModelState<double> trained_state(bool trainable_embeddings) {
  auto f = test::load_synthetic();
  auto cfg = f.config.model;
  cfg.epochs = 2;
  cfg.trainable_embeddings = trainable_embeddings;
  return train<double>(cfg, f.table, f.train, {}).state;
}

void expect_same(const ModelState<double>& a, const ModelState<double>& b) {
  EXPECT_EQ(a.config, b.config);
  EXPECT_EQ(a.vocab.tokens(), b.vocab.tokens());
  EXPECT_EQ(a.adam_step, b.adam_step);
  EXPECT_TRUE(a.params == b.params);
  EXPECT_TRUE(a.adam_m == b.adam_m);
  EXPECT_TRUE(a.adam_v == b.adam_v);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto s = trained_state(false);
  test::TempDir dir("ckpt");
  save_checkpoint(s, dir / "model.ckpt");
  const auto loaded = load_checkpoint<double>(dir / "model.ckpt");
  expect_same(s, loaded);
  EXPECT_EQ(format_checkpoint(loaded), format_checkpoint(s));
}

TEST(Checkpoint, TrainableEmbeddingsKeepTheirMoments) {
  const auto s = trained_state(true);
  std::istringstream in(format_checkpoint(s));
  expect_same(s, load_checkpoint<double>(in));
  EXPECT_NE(format_checkpoint(s).find("adam_m.embedding"), std::string::npos);
  EXPECT_EQ(format_checkpoint(trained_state(false)).find("adam_m.embedding"), std::string::npos);
}

TEST(Checkpoint, EqualStatesGiveEqualBytes) {
  EXPECT_EQ(format_checkpoint(trained_state(false)), format_checkpoint(trained_state(false)));
}

TEST(Checkpoint, PredictionsSurviveTheRoundTrip) {
  auto f = test::load_synthetic();
  const auto s = trained_state(false);
  std::istringstream in(format_checkpoint(s));
  const auto loaded = load_checkpoint<double>(in);
  const auto a = predict_scored(s, f.dev_tweets);
  const auto b = predict_scored(loaded, f.dev_tweets);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].probability, b[i].probability);
}

TEST(Checkpoint, SinglePrecisionRoundTrip) {
  const auto table = test::random_table(7, 6, 2);
  const auto s = initialize<float>(test::toy_config(), table);
  std::istringstream in(format_checkpoint(s));
  const auto loaded = load_checkpoint<float>(in);
  EXPECT_TRUE(s.params == loaded.params);
  EXPECT_NE(format_checkpoint(s).find("scalar f32"), std::string::npos);
}

std::string replace_once(std::string s, const std::string& from, const std::string& to) {
  const auto pos = s.find(from);
  EXPECT_NE(pos, std::string::npos) << from;
  return s.replace(pos, from.size(), to);
}

TEST(Checkpoint, CorruptionIsDetected) {
  const auto good = format_checkpoint(initialize<double>(test::toy_config(), test::random_table(5, 6, 1)));
  const auto expect_bad = [](const std::string& text) {
    std::istringstream in(text);
    EXPECT_THROW(load_checkpoint<double>(in), DataError);
  };
  expect_bad("");
  expect_bad(replace_once(good, "tweetinfo-bigrucnn-checkpoint 1", "something-else 1"));
  expect_bad(replace_once(good, "tweetinfo-bigrucnn-checkpoint 1", "tweetinfo-bigrucnn-checkpoint 2"));
  expect_bad(replace_once(good, "\nw3\n", "\nw9\n"));
  expect_bad(replace_once(good, "config gru_hidden=4", "config gru_hidden=5"));
  expect_bad(replace_once(good, "config seed=11", "config colour=11"));
  expect_bad(good.substr(0, good.size() / 2));
  expect_bad(good.substr(0, good.size() - 4));
  expect_bad(replace_once(good, "tensor param.dense_bias 1 1\n0", "tensor param.dense_bias 1 1\nnan"));
}

TEST(Checkpoint, MissingFileIsADataError) {
  EXPECT_THROW(load_checkpoint<double>(std::filesystem::path("/nonexistent/model.ckpt")), DataError);
}

}  // namespace
}  // namespace tweetinfo
