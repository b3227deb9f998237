#include "qrnn/summation.h"

#include "qrnn/random.h"

namespace qrnn {

std::int32_t encode_symbol(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c == '+') return kPlusId;
  if (c == ' ') return kSpaceId;
  throw DataError(std::string("symbol '") + c + "' is outside the summation alphabet");
}

char decode_symbol(std::int32_t id) {
  if (id >= 0 && id <= 9) return char('0' + id);
  if (id == kPlusId) return '+';
  if (id == kSpaceId) return ' ';
  throw DataError("summation id " + std::to_string(id) + " is outside [0, 12)");
}

std::vector<std::int32_t> encode_sum(std::string_view text) {
  std::vector<std::int32_t> ids;
  ids.reserve(text.size());
  for (char c : text) ids.push_back(encode_symbol(c));
  return ids;
}

std::string decode_sum(std::span<const std::int32_t> ids) {
  std::string s;
  s.reserve(ids.size());
  for (auto id : ids) s.push_back(decode_symbol(id));
  return s;
}

SumSample make_sum_sample(std::uint64_t a, std::uint64_t b, std::size_t max_digits) {
  if (max_digits == 0) throw ConfigError("max_digits must be at least 1");
  std::string expr = std::to_string(a) + "+" + std::to_string(b);
  std::string total = std::to_string(a + b);
  const std::size_t in_w = sum_input_width(max_digits);
  const std::size_t out_w = sum_target_width(max_digits);
  if (expr.size() > in_w || total.size() > out_w) {
    throw DomainError("operands " + expr + " exceed " + std::to_string(max_digits) +
                      " digits");
  }
  expr.insert(0, in_w - expr.size(), ' ');
  total.append(out_w - total.size(), ' ');
  return {encode_sum(expr), encode_sum(total)};
}

std::vector<SumSample> gen_sum_dataset(std::size_t n, std::size_t max_digits,
                                       std::uint64_t seed) {
  if (max_digits == 0 || max_digits > 9) {
    throw ConfigError("max_digits must be in [1, 9], got " + std::to_string(max_digits));
  }
  std::uint64_t limit = 1;
  for (std::size_t i = 0; i < max_digits; ++i) limit *= 10;
  Rng rng(seed);
  std::vector<SumSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t a = rng.below(limit);
    const std::uint64_t b = rng.below(limit);
    out.push_back(make_sum_sample(a, b, max_digits));
  }
  return out;
}

template <Real T>
Tensor<T> one_hot(std::span<const std::int32_t> ids, std::size_t classes) {
  Tensor<T> out({ids.size(), classes});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || std::size_t(ids[i]) >= classes) {
      throw DataError("id " + std::to_string(ids[i]) + " outside [0, " +
                      std::to_string(classes) + ")");
    }
    out[i * classes + std::size_t(ids[i])] = T(1);
  }
  return out;
}

double sequence_accuracy(const std::vector<std::vector<std::int32_t>>& pred,
                         const std::vector<std::vector<std::int32_t>>& target) {
  if (pred.size() != target.size()) {
    throw ShapeError("sequence_accuracy: " + std::to_string(pred.size()) +
                     " predictions for " + std::to_string(target.size()) + " targets");
  }
  if (pred.empty()) throw DomainError("sequence_accuracy of an empty set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == target[i];
  return double(hits) / double(pred.size());
}

template Tensor<float> one_hot(std::span<const std::int32_t>, std::size_t);
template Tensor<double> one_hot(std::span<const std::int32_t>, std::size_t);

}  // namespace qrnn
