#include "collapsim/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace collapsim::kernels {

#ifndef COLLAPSIM_HAVE_AVX2
const KernelTable* avx2_table() { return nullptr; }
#endif

namespace {

const KernelTable* pick_default() {
    if (const char* env = std::getenv("COLLAPSIM_KERNELS")) {
        std::string want(env);
        if (want == "scalar") return &scalar_table();
        if (want == "avx2" && avx2_table()) return avx2_table();
        return &scalar_table();
    }
#if defined(__x86_64__) || defined(__i386__)
    if (__builtin_cpu_supports("avx2") && avx2_table()) return avx2_table();
#endif
    return &scalar_table();
}

const KernelTable*& active_slot() {
    static const KernelTable* slot = pick_default();
    return slot;
}

} // namespace

const KernelTable& active() { return *active_slot(); }

void select(const char* name) {
    std::string want(name);
    if (want == "scalar") {
        active_slot() = &scalar_table();
        return;
    }
    if (want == "avx2" && avx2_table()) {
        active_slot() = avx2_table();
        return;
    }
    throw std::invalid_argument("unknown kernel backend: " + want);
}

} // namespace collapsim::kernels
