#include "dmt/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace dmt {

int configure_threads_from_env() {
  if (const char* env = std::getenv("DMT_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) omp_set_num_threads(n);
    } catch (const std::exception&) {
      // Unparseable values leave the runtime default in place.
    }
  }
  return worker_count();
}

int worker_count() { return omp_get_max_threads(); }

}  // namespace dmt
