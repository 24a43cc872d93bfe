#include "ap/rng.hpp"

namespace ap {

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

uint64_t derive_seed(uint64_t base, std::initializer_list<uint64_t> path) {
    uint64_t s = splitmix64(base);
    for (uint64_t component : path) {
        s = splitmix64(s ^ splitmix64(component));
    }
    return s;
}

}  // namespace ap
