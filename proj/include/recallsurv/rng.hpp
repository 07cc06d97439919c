#pragma once

#include <cstdint>
#include <random>

namespace recallsurv {

// Independent generator for stream `index` under a master seed. Streams are
// keyed by (seed, index) alone, so results do not depend on how work is
// scheduled across threads.
class StreamRng {
 public:
  StreamRng(std::uint64_t seed, std::uint64_t index);

  // Uniform on the open interval (0, 1).
  double uniform();
  // Uniform integer on [lo, hi].
  int uniform_int(int lo, int hi);

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

// Seed for a derived sub-stream, e.g. the dataset of one Monte Carlo replicate.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace recallsurv
