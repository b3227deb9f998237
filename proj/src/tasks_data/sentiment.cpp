#include "qrnn/sentiment.h"

#include <charconv>
#include <fstream>

#include "qrnn/errors.h"
#include "qrnn/random.h"

namespace qrnn {

std::vector<SentimentSample> load_sentiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open sentiment file " + path);
  std::vector<SentimentSample> out;
  std::string line;
  long long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": missing tab after label",
                       line_no);
    }
    SentimentSample s;
    const char* first = line.data();
    auto [lp, lerr] = std::from_chars(first, first + tab, s.label);
    if (lerr != std::errc() || lp != first + tab) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": label is not an integer",
                       line_no);
    }
    if (s.label != 0 && s.label != 1) {
      throw DataError(path + ":" + std::to_string(line_no) + ": label " +
                      std::to_string(s.label) + " is not 0 or 1");
    }
    const char* p = first + tab + 1;
    const char* end = first + line.size();
    while (p < end) {
      if (*p == ' ') {
        ++p;
        continue;
      }
      std::int32_t id = 0;
      auto [np, err] = std::from_chars(p, end, id);
      if (err != std::errc() || id < 0 || (np < end && *np != ' ')) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": bad token id near column " +
                             std::to_string(p - first + 1),
                         line_no);
      }
      s.tokens.push_back(id);
      p = np;
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_sentiment(const std::string& path, const std::vector<SentimentSample>& samples) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (const auto& s : samples) {
    out << s.label << '\t';
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      if (i) out << ' ';
      out << s.tokens[i];
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

SentimentSample preprocess(const SentimentSample& s, std::size_t max_features,
                           std::size_t maxlen) {
  if (max_features <= std::size_t(kOovId)) {
    throw ConfigError("max_features must exceed the OOV id " + std::to_string(kOovId));
  }
  SentimentSample out;
  out.label = s.label;
  out.tokens.assign(maxlen, kPadId);
  const std::size_t keep = std::min(maxlen, s.tokens.size());
  const std::size_t src = s.tokens.size() - keep;
  const std::size_t dst = maxlen - keep;
  for (std::size_t i = 0; i < keep; ++i) {
    const std::int32_t id = s.tokens[src + i];
    out.tokens[dst + i] = std::size_t(id) >= max_features ? kOovId : id;
  }
  return out;
}

std::vector<SentimentSample> preprocess(const std::vector<SentimentSample>& samples,
                                        std::size_t max_features, std::size_t maxlen) {
  std::vector<SentimentSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(preprocess(s, max_features, maxlen));
  return out;
}

std::vector<SentimentSample> gen_synthetic_sentiment(const SyntheticSentimentConfig& cfg) {
  if (cfg.vocab < 100) throw ConfigError("synthetic vocabulary must hold at least 100 ids");
  if (cfg.min_length == 0 || cfg.max_length < cfg.min_length) {
    throw ConfigError("synthetic lengths need 0 < min_length <= max_length");
  }
  // Ids 0-3 are reserved; the two bands of 40 ids carry the label.
  const std::int64_t band = 40;
  const std::int64_t pos_lo = 4, neg_lo = 4 + band, neutral_lo = 4 + 2 * band;
  Rng rng(cfg.seed);
  std::vector<SentimentSample> out;
  out.reserve(cfg.samples);
  for (std::size_t n = 0; n < cfg.samples; ++n) {
    SentimentSample s;
    s.label = int(n % 2);
    const std::size_t len =
        std::size_t(rng.between(std::int64_t(cfg.min_length), std::int64_t(cfg.max_length)));
    const std::int64_t lo = s.label ? pos_lo : neg_lo;
    for (std::size_t i = 0; i < len; ++i) {
      if (rng.uniform() < cfg.signal) {
        s.tokens.push_back(std::int32_t(rng.between(lo, lo + band - 1)));
      } else {
        // Skewed towards small ids, like word frequency ranks.
        const double u = rng.uniform();
        const auto span = double(std::int64_t(cfg.vocab) - neutral_lo);
        s.tokens.push_back(std::int32_t(neutral_lo + std::int64_t(span * u * u)));
      }
    }
    out.push_back(std::move(s));
  }
  rng.shuffle(out.begin(), out.end());
  return out;
}

}  // namespace qrnn
