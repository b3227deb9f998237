#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qrnn/tensor.h"

namespace qrnn {

// Twelve-symbol alphabet: '0'-'9' -> 0-9, '+' -> 10, ' ' -> 11.
inline constexpr std::size_t kSumVocab = 12;
inline constexpr std::int32_t kPlusId = 10;
inline constexpr std::int32_t kSpaceId = 11;

std::int32_t encode_symbol(char c);
char decode_symbol(std::int32_t id);
std::vector<std::int32_t> encode_sum(std::string_view text);
std::string decode_sum(std::span<const std::int32_t> ids);

struct SumSample {
  // "a+b" left-padded with spaces to 2 * max_digits + 1 symbols.
  std::vector<std::int32_t> input_ids;
  // Decimal a+b right-padded with spaces to max_digits + 1 symbols.
  std::vector<std::int32_t> target_ids;

  bool operator==(const SumSample&) const = default;
};

inline std::size_t sum_input_width(std::size_t max_digits) { return 2 * max_digits + 1; }
inline std::size_t sum_target_width(std::size_t max_digits) { return max_digits + 1; }

SumSample make_sum_sample(std::uint64_t a, std::uint64_t b, std::size_t max_digits);

// Operands drawn uniformly from [0, 10^max_digits).
std::vector<SumSample> gen_sum_dataset(std::size_t n, std::size_t max_digits,
                                       std::uint64_t seed);

// [len, classes] indicator rows.
template <Real T>
Tensor<T> one_hot(std::span<const std::int32_t> ids, std::size_t classes);

// Fraction of rows whose every symbol matches.
double sequence_accuracy(const std::vector<std::vector<std::int32_t>>& pred,
                         const std::vector<std::vector<std::int32_t>>& target);

}  // namespace qrnn
