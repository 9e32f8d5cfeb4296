#include "gacg/numerics/rng.hpp"

#include <cmath>
#include <numbers>

#include "gacg/numerics/errors.hpp"

namespace gacg::num {
namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id,
                     std::uint64_t counter)
    : seed_(seed),
      stream_id_(stream_id),
      key_(mix64(mix64(seed + kGolden) ^ mix64(stream_id * 0xd1b54a32d192ed03ULL + 1))),
      counter_(counter) {}

std::uint64_t RngStream::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::uniform_int(std::uint64_t n) {
  if (n == 0) throw ParameterError("uniform_int: n must be positive");
  // Rejection sampling keeps the distribution exactly uniform.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

double RngStream::normal() {
  const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

RngStream RngStream::fork(std::uint64_t salt) const {
  return RngStream(mix64(seed_ ^ mix64(salt + kGolden)),
                   stream_id_ * 0x100000001b3ULL + salt + 1);
}

std::vector<double> standard_normal(RngStream& rng, std::size_t count) {
  if (count == 0) throw ParameterError("standard_normal: count must be >= 1");
  std::vector<double> out(count);
  for (auto& x : out) x = rng.normal();
  return out;
}

}  // namespace gacg::num
