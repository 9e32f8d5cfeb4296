#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace gacg::num {

// Counter-based random stream. Output i of stream (seed, stream_id) is a pure
// function of (seed, stream_id, i), so a stream is fully described by three
// integers and can be checkpointed and restored exactly.
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}
  RngStream(std::uint64_t seed, std::uint64_t stream_id,
            std::uint64_t counter = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();
  // Uniform on [0, 1).
  double uniform();
  // Uniform integer on [0, n). n must be positive.
  std::uint64_t uniform_int(std::uint64_t n);
  // One N(0,1) variate (Box-Muller, consumes two words).
  double normal();

  // Derives an independent child stream (used for per-episode sub-streams).
  RngStream fork(std::uint64_t salt) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_;
};

std::vector<double> standard_normal(RngStream& rng, std::size_t count);

}  // namespace gacg::num
