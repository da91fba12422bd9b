#include <atomic>
#include <cstring>

#include "mldili/simd_kernels.hpp"

namespace mldili::kernels {

const KernelTable* avx2_table();
const KernelTable* neon_table();

namespace {

bool host_supports(const KernelTable* t) {
  if (t == nullptr) return false;
#if defined(__x86_64__) || defined(_M_X64)
  if (std::strcmp(t->name, "avx2") == 0)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#endif
  return true;  // scalar and neon (compile-time gated) always run
}

const KernelTable* pick_best() {
  if (host_supports(avx2_table())) return avx2_table();
  if (host_supports(neon_table())) return neon_table();
  return &scalar();
}

std::atomic<const KernelTable*> g_active{nullptr};

}  // namespace

const KernelTable& active() {
  const KernelTable* t = g_active.load(std::memory_order_acquire);
  if (t == nullptr) {
    t = pick_best();
    g_active.store(t, std::memory_order_release);
  }
  return *t;
}

bool select(std::string_view name) {
  const KernelTable* candidates[] = {&scalar(), avx2_table(), neon_table()};
  for (const KernelTable* t : candidates) {
    if (t != nullptr && name == t->name && host_supports(t)) {
      g_active.store(t, std::memory_order_release);
      return true;
    }
  }
  return false;
}

const KernelTable* const* available(std::size_t* count) {
  static const KernelTable* tables[3];
  std::size_t n = 0;
  tables[n++] = &scalar();
  if (host_supports(avx2_table())) tables[n++] = avx2_table();
  if (host_supports(neon_table())) tables[n++] = neon_table();
  *count = n;
  return tables;
}

}  // namespace mldili::kernels
