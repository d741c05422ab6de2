#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <random>
#include <thread>
#include <vector>

#include "vlsf/error.hpp"

namespace vlsf {

struct mc_config {
  std::uint64_t trials = 100000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
};

// Trials are cut into blocks of this size; block b always draws from the
// stream seeded by block_seed(seed, b), so results do not depend on workers.
inline constexpr std::uint64_t kBlockTrials = 4096;

// SplitMix64 finalizer over (seed, block).
inline std::uint64_t block_seed(std::uint64_t seed, std::uint64_t block) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (block + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

using block_engine = std::mt19937_64;

// Runs fn(engine, trials_in_block) -> Acc for every block, possibly on several
// threads, and folds the per-block results in block order with `merge`.
template <class Acc, class Fn, class Merge>
Acc run_blocks(const mc_config& cfg, Fn&& fn, Merge&& merge) {
  if (cfg.trials == 0) throw error(errc::invalid_argument, "trials must be >= 1");
  const std::uint64_t blocks = (cfg.trials + kBlockTrials - 1) / kBlockTrials;
  std::vector<Acc> partial(blocks);

  std::atomic<std::uint64_t> next{0};
  auto worker = [&] {
    for (std::uint64_t b = next++; b < blocks; b = next++) {
      const std::uint64_t count = std::min(kBlockTrials, cfg.trials - b * kBlockTrials);
      block_engine engine(block_seed(cfg.seed, b));
      partial[b] = fn(engine, count);
    }
  };

  const unsigned workers =
      static_cast<unsigned>(std::clamp<std::uint64_t>(cfg.workers, 1, blocks));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned i = 0; i < workers; ++i) pool.emplace_back(worker);
  }

  Acc total{};
  for (auto& p : partial) merge(total, p);
  return total;
}

}  // namespace vlsf
