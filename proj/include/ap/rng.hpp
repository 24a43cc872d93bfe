#pragma once

#include <cstdint>
#include <initializer_list>

namespace ap {

// SplitMix64 output function: a single, well-mixed 64-bit step.
uint64_t splitmix64(uint64_t x);

// Deterministic seed-stream derivation: hashes the base seed with each path
// component in order, so (run seed, env index, episode counter) and similar
// tuples map to independent, reproducible generator seeds.
uint64_t derive_seed(uint64_t base, std::initializer_list<uint64_t> path);

}  // namespace ap
