// Copyright (c) 2026 MADM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <iosfwd>

namespace madm {

/// Deterministic PCG32 generator with explicit, serializable state.
///
/// Every stochastic choice in the toolkit draws from an Rng handed in by the
/// caller. Streams are cheap: derive() hashes an arbitrary key list into an
/// independent (state, stream) pair, so per-sample generators keyed on
/// (seed, purpose, sample, iteration) stay reproducible regardless of
/// evaluation order.
class Rng {
 public:
  struct State {
    std::uint64_t state = 0;
    std::uint64_t inc = 0;
    bool has_cached_normal = false;
    double cached_normal = 0.0;
  };

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  /// Independent generator derived from a seed and a key path.
  static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> key);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n); n > 0. Unbiased (rejection sampling).
  int uniform_int(int n);
  /// Standard normal draw (Box-Muller, second value cached).
  double normal();
  /// Bernoulli with probability p.
  bool bernoulli(double p);

  State save() const;
  void restore(const State& s);

  friend std::ostream& operator<<(std::ostream& os, const Rng& r);
  friend std::istream& operator>>(std::istream& is, Rng& r);

 private:
  std::uint64_t state_;
  std::uint64_t inc_;
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

/// 64-bit splitmix step, used for key hashing and seed expansion.
std::uint64_t splitmix64(std::uint64_t& x);

/// Deterministic generator for a non-negative seed. Equal seeds yield
/// identical streams; distinct seeds yield distinct streams.
Rng seeded_rng(std::uint64_t seed);

}  // namespace madm
