// Copyright (c) 2026 MADM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
#include "madm/rng.hpp"

#include <bit>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>

namespace madm {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream) {
  // PCG32 seeding: the stream selector must be odd.
  inc_ = (stream << 1u) | 1u;
  state_ = 0;
  next_u32();
  state_ += seed;
  next_u32();
}

Rng Rng::derive(std::uint64_t seed, std::initializer_list<std::uint64_t> key) {
  std::uint64_t x = seed ^ 0xa02bdbf7bb3c0a7ull;
  std::uint64_t s = splitmix64(x);
  std::uint64_t inc = splitmix64(x);
  for (std::uint64_t k : key) {
    x ^= k + 0x9e3779b97f4a7c15ull + (x << 6) + (x >> 2);
    s ^= splitmix64(x);
    inc ^= splitmix64(x);
  }
  return Rng(s, inc);
}

std::uint32_t Rng::next_u32() {
  std::uint64_t old = state_;
  state_ = old * 6364136223846793005ull + inc_;
  std::uint32_t xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
  std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
  return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
}

std::uint64_t Rng::next_u64() {
  std::uint64_t hi = next_u32();
  std::uint64_t lo = next_u32();
  return (hi << 32) | lo;
}

double Rng::uniform() {
  // 53 random bits into [0, 1).
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::uniform_int(int n) {
  const std::uint32_t bound = static_cast<std::uint32_t>(n);
  const std::uint32_t threshold = (-bound) % bound;
  for (;;) {
    std::uint32_t r = next_u32();
    if (r >= threshold) return static_cast<int>(r % bound);
  }
}

double Rng::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * std::numbers::pi * u2;
  cached_normal_ = r * std::sin(theta);
  has_cached_normal_ = true;
  return r * std::cos(theta);
}

bool Rng::bernoulli(double p) { return uniform() < p; }

Rng::State Rng::save() const { return State{state_, inc_, has_cached_normal_, cached_normal_}; }

void Rng::restore(const State& s) {
  state_ = s.state;
  inc_ = s.inc;
  has_cached_normal_ = s.has_cached_normal;
  cached_normal_ = s.cached_normal;
}

std::ostream& operator<<(std::ostream& os, const Rng& r) {
  os << r.state_ << ' ' << r.inc_ << ' ' << (r.has_cached_normal_ ? 1 : 0);
  if (r.has_cached_normal_) {
    os << ' ';
    auto bits = std::bit_cast<std::uint64_t>(r.cached_normal_);
    os << bits;
  }
  return os;
}

std::istream& operator>>(std::istream& is, Rng& r) {
  int cached = 0;
  is >> r.state_ >> r.inc_ >> cached;
  r.has_cached_normal_ = cached != 0;
  if (r.has_cached_normal_) {
    std::uint64_t bits = 0;
    is >> bits;
    r.cached_normal_ = std::bit_cast<double>(bits);
  } else {
    r.cached_normal_ = 0.0;
  }
  return is;
}

Rng seeded_rng(std::uint64_t seed) { return Rng(seed, 0x853c49e6748fea9bull); }

}  // namespace madm
