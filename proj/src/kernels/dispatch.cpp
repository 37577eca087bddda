// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <cstdlib>
#include <string>

#include "medre/error.hpp"
#include "medre/kernels.hpp"

namespace medre::kernels {

namespace {

const KernelTable *resolve(std::string_view name) {
  if (name == "scalar")
    return &scalar_table();
  if (name == "avx2") {
    if (avx2_table() == nullptr || !cpu_supports_avx2())
      throw ConfigError("avx2 kernels requested but unavailable on this CPU");
    return avx2_table();
  }
  if (name == "auto" || name.empty())
    return (avx2_table() != nullptr && cpu_supports_avx2()) ? avx2_table()
                                                            : &scalar_table();
  throw ConfigError("unknown kernel variant '" + std::string(name) +
                    "' (expected scalar, avx2 or auto)");
}

std::atomic<const KernelTable *> &current() {
  static std::atomic<const KernelTable *> table{[] {
    const char *env = std::getenv("MEDRE_KERNELS");
    return resolve(env ? env : "auto");
  }()};
  return table;
}

} // namespace

const KernelTable &active() { return *current().load(std::memory_order_relaxed); }

void select(std::string_view name) {
  current().store(resolve(name), std::memory_order_relaxed);
}

} // namespace medre::kernels
