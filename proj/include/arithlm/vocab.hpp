#pragma once

namespace arithlm::vocab {

inline constexpr int kUnused = 0;
inline constexpr int kStart = 1;
inline constexpr int kOp = 2;
inline constexpr int kZero = 3;
inline constexpr int kOne = 4;
inline constexpr int kSize = 5;

inline constexpr int bit_token(int bit) { return bit ? kOne : kZero; }
inline constexpr bool is_bit(int token) { return token == kZero || token == kOne; }

}  // namespace arithlm::vocab
