#pragma once

#include <cstdint>
#include <random>

namespace dagsched {

/// Deterministic per-user, per-purpose random streams derived from one
/// master seed. Streams with different (user, purpose) tags are
/// independent regardless of the order they are drawn from.
enum class StreamKind : std::uint64_t {
  Channel = 1,
  Sizes = 2,
  Exploration = 3,
  Initial = 4,
};

using Rng = std::mt19937_64;

inline Rng make_stream(std::uint64_t master_seed, int user, StreamKind kind) {
  const std::uint64_t tags[] = {master_seed,
                                static_cast<std::uint64_t>(user) + 0x9e3779b9ULL,
                                static_cast<std::uint64_t>(kind)};
  std::seed_seq seq(std::begin(tags), std::end(tags));
  return Rng(seq);
}

/// Samples an index from a discrete distribution given as (value, prob) rows.
template <class Rows>
inline int sample_index(const Rows& rows, Rng& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double u = u01(rng);
  double acc = 0.0;
  int last = 0;
  for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
    acc += rows[i];
    last = i;
    if (u < acc) return i;
  }
  return last;
}

}  // namespace dagsched
