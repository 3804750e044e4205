#include "solverkit/exec_mode.hpp"

#include <atomic>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace solverkit::exec {

namespace {

bool env_serial() {
  const char* v = std::getenv("SOLVERKIT_SERIAL");
  return v != nullptr && v[0] != '\0' && v[0] != '0';
}

std::atomic<bool>& serial_flag() {
  static std::atomic<bool> flag{env_serial()};
  return flag;
}

std::atomic<int>& thread_count() {
  static std::atomic<int> n{0};  // 0 means library default
  return n;
}

}  // namespace

bool serial() { return serial_flag().load(std::memory_order_relaxed); }

void set_serial(bool on) { serial_flag().store(on, std::memory_order_relaxed); }

int threads() {
  if (serial()) return 1;
  int n = thread_count().load(std::memory_order_relaxed);
  if (n > 0) return n;
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
  thread_count().store(n, std::memory_order_relaxed);
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#endif
}

}  // namespace solverkit::exec
