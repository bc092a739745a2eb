#include "pointcont/kernels.hpp"

#include <atomic>

namespace pct::kernels {

namespace {
std::atomic<Exec> g_exec{Exec::parallel};
}

Exec default_exec() noexcept { return g_exec.load(std::memory_order_relaxed); }
void set_default_exec(Exec e) noexcept { g_exec.store(e, std::memory_order_relaxed); }

}  // namespace pct::kernels
