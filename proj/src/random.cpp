#include "cpe/random.hpp"

#include "cpe/parallel.hpp"

namespace cpe {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, StreamSalt salt, std::uint64_t index) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(salt));
  return splitmix64(h ^ splitmix64(index));
}

Engine make_stream(std::uint64_t seed, StreamSalt salt, std::uint64_t index) {
  return Engine(derive_seed(seed, salt, index));
}

std::uint64_t sibling_seed(std::uint64_t seed, std::uint64_t which) {
  return splitmix64(seed ^ (0xa5a5a5a5ULL * (which + 1)));
}

namespace {
std::atomic<unsigned> g_workers{1};
}

void set_worker_count(unsigned workers) { g_workers = workers == 0 ? 1 : workers; }

unsigned worker_count() { return g_workers; }

}  // namespace cpe
