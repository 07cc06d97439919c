#include "recallsurv/rng.hpp"

namespace recallsurv {

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x5eedu};
  return std::mt19937_64(seq);
}

}  // namespace

StreamRng::StreamRng(std::uint64_t seed, std::uint64_t index) : engine_(make_engine(seed, index)) {}

double StreamRng::uniform() {
  // 53 random bits, shifted off zero
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

int StreamRng::uniform_int(int lo, int hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  // rejection keeps the draw exactly uniform
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return lo + static_cast<int>(x % span);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  auto engine = make_engine(seed ^ 0x9e3779b97f4a7c15ull, index);
  return engine();
}

}  // namespace recallsurv
