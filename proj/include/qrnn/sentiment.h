#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace qrnn {

inline constexpr std::int32_t kPadId = 0;
inline constexpr std::int32_t kOovId = 2;

struct SentimentSample {
  std::vector<std::int32_t> tokens;
  int label = 0;

  bool operator==(const SentimentSample&) const = default;
};

// One record per line: a label digit, a tab, then space-separated
// non-negative token ids. Blank lines are skipped.
std::vector<SentimentSample> load_sentiment(const std::string& path);
void write_sentiment(const std::string& path, const std::vector<SentimentSample>& samples);

// Ids >= max_features become kOovId; sequences are left-padded with kPadId
// to maxlen and longer ones keep their last maxlen tokens.
SentimentSample preprocess(const SentimentSample& s, std::size_t max_features,
                           std::size_t maxlen);
std::vector<SentimentSample> preprocess(const std::vector<SentimentSample>& samples,
                                        std::size_t max_features, std::size_t maxlen);

// Balanced labelled corpus with a learnable signal: each review mixes
// neutral tokens with tokens drawn from a label-specific band of the
// vocabulary. Used when no real corpus is available.
struct SyntheticSentimentConfig {
  std::size_t samples = 1000;
  std::size_t vocab = 20000;
  std::size_t min_length = 20;
  std::size_t max_length = 120;
  // Fraction of tokens taken from the label's band.
  double signal = 0.08;
  std::uint64_t seed = 0;
};

std::vector<SentimentSample> gen_synthetic_sentiment(const SyntheticSentimentConfig& cfg);

}  // namespace qrnn
