#include "dcpl/parallel.hpp"

#include <cstdlib>
#include <string>

namespace dcpl {

std::size_t configured_threads() {
  const char* env = std::getenv("DCPL_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const unsigned long v = std::strtoul(env, &end, 10);
  if (end == env) return 1;
  if (v == 0) return std::max(1u, std::thread::hardware_concurrency());
  return static_cast<std::size_t>(v);
}

}  // namespace dcpl
