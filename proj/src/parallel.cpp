#include "ibkd/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace ibkd::parallel {

int configured_threads() {
  if (const char* env = std::getenv("IBKD_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
      // fall through to the machine default
    }
  }
  return omp_get_num_procs();
}

void apply_thread_env() { omp_set_num_threads(configured_threads()); }

void set_threads(int n) { omp_set_num_threads(n > 0 ? n : 1); }

int max_threads() { return omp_get_max_threads(); }

}  // namespace ibkd::parallel
