#include "isomer/numerics/flops.hpp"

namespace isomer::flops {

namespace {
thread_local std::uint64_t g_counter = 0;
}

void count(std::uint64_t n) { g_counter += n; }
std::uint64_t current() { return g_counter; }
void reset() { g_counter = 0; }

}  // namespace isomer::flops
