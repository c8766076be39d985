#include <gtest/gtest.h>

#include <random>

#include "test_util.hpp"
#include "tweetinfo/preprocess.hpp"

namespace tweetinfo {
namespace {

using Tokens = std::vector<std::string>;

TEST(Normalize, Examples) {
  EXPECT_EQ(normalize("@USER Stay Home HTTPURL"), "stay home");
  EXPECT_EQ(normalize("  18  confirmed\tcases \n"), "18 confirmed cases");
  EXPECT_EQ(normalize("see https://t.co/abc and www.example.org now"), "see and now");
  EXPECT_EQ(normalize("hi @some_user_9!"), "hi !");
  EXPECT_EQ(normalize("#SocialDistance.HTTPURL"), "#socialdistance.");
  EXPECT_EQ(normalize("@USER HTTPURL"), "");
  EXPECT_EQ(normalize(""), "");
}

TEST(Normalize, RemovalCanExposeNewMatches) {
  EXPECT_EQ(normalize("httphttpurlurl x"), "x");
}

TEST(Normalize, GoldenReferenceTweets) {
  const auto raw = load_split(test::golden("reference_tweets.tsv"), true);
  const auto expected = load_split(test::golden("reference_tweets.normalized.tsv"), true);
  ASSERT_EQ(raw.size(), expected.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    EXPECT_EQ(raw[i].id, expected[i].id);
    EXPECT_EQ(normalize(raw[i].text), expected[i].text) << raw[i].id;
  }
}

std::string random_text(std::mt19937_64& rng) {
  static const std::vector<std::string> pieces{
      "@USER", "@user", "@", "HTTPURL", "httpurl", "http", "url", "https://", "http://", "www.",
      "www", "Covid", "19", "#", ".", ",", " ", "  ", "\t", "\n", "a", "B", "_", "x@y", "HTTP"};
  std::string s;
  const auto n = rng() % 25;
  for (std::size_t i = 0; i < n; ++i) s += pieces[rng() % pieces.size()];
  return s;
}

TEST(Normalize, IdempotentAndPlaceholderFree) {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 5000; ++i) {
    const auto raw = random_text(rng);
    const auto once = normalize(raw);
    EXPECT_EQ(normalize(once), once) << "input: " << raw;
    EXPECT_EQ(once.find("httpurl"), std::string::npos) << raw;
    EXPECT_EQ(once.find("http://"), std::string::npos) << raw;
    EXPECT_EQ(once.find("https://"), std::string::npos) << raw;
    EXPECT_EQ(once.find("@user"), std::string::npos) << raw;
    EXPECT_EQ(once.find("  "), std::string::npos) << raw;
    if (!once.empty()) {
      EXPECT_NE(once.front(), ' ');
      EXPECT_NE(once.back(), ' ');
    }
  }
}

TEST(Tokenize, Examples) {
  EXPECT_EQ(tokenize("18 confirmed cases in westchester."),
            (Tokens{"18", "confirmed", "cases", "in", "westchester", "."}));
  EXPECT_EQ(tokenize("#covid19 stats: 1,000 (2.5%)"),
            (Tokens{"#covid19", "stats", ":", "1,000", "(", "2.5", "%", ")"}));
  EXPECT_EQ(tokenize("state's"), (Tokens{"state", "'", "s"}));
  EXPECT_EQ(tokenize("# alone ##x"), (Tokens{"#", "alone", "#", "#x"}));
  EXPECT_EQ(tokenize("20/03/20"), (Tokens{"20", "/", "03", "/", "20"}));
  EXPECT_EQ(tokenize("1. 2,a"), (Tokens{"1", ".", "2", ",", "a"}));
  EXPECT_EQ(tokenize("caf\xc3\xa9!"), (Tokens{"caf\xc3\xa9", "!"}));
  EXPECT_TRUE(tokenize("   ").empty());
}

TEST(Tokenize, TokensNeverContainWhitespace) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 2000; ++i) {
    for (const auto& t : tokenize(normalize(random_text(rng)))) {
      EXPECT_FALSE(t.empty());
      EXPECT_EQ(t.find_first_of(" \t\n\r"), std::string::npos);
    }
  }
}

class Encode : public ::testing::Test {
 protected:
  void SetUp() override {
    for (const char* t : {"cases", "confirmed", "stay"}) vocab_.add(t);
  }
  Vocabulary vocab_;
};

TEST_F(Encode, PadsUnknownsAndClips) {
  const auto s = encode({"confirmed", "cases", "zzz"}, vocab_, 5);
  EXPECT_EQ(s.tokens, (std::vector<TokenId>{3, 2, kUnkId, kPadId, kPadId}));
  EXPECT_EQ(s.unknown_count, 1u);
  EXPECT_EQ(s.length(), 3u);

  const auto clipped = encode({"stay", "zzz", "stay", "cases"}, vocab_, 2);
  EXPECT_EQ(clipped.tokens, (std::vector<TokenId>{4, kUnkId}));
  EXPECT_EQ(clipped.original_length, 4u);
  EXPECT_EQ(clipped.length(), 2u);
}

TEST_F(Encode, LengthIsAlwaysMaxLength) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 500; ++i) {
    const auto raw = random_text(rng);
    const std::size_t max_len = 1 + rng() % 16;
    EXPECT_EQ(encode_text(raw, vocab_, max_len).tokens.size(), max_len);
  }
  EXPECT_EQ(encode_text("x", vocab_).tokens.size(), kDefaultMaxLength);
}

TEST_F(Encode, ZeroMaxLengthIsAUsageError) {
  EXPECT_THROW(encode({"cases"}, vocab_, 0), UsageError);
}

TEST_F(Encode, ReservedNamesAreNotTokens) {
  EXPECT_EQ(vocab_.lookup("<pad>"), kUnkId);
  EXPECT_EQ(vocab_.lookup("<unk>"), kUnkId);
}

}  // namespace
}  // namespace tweetinfo
