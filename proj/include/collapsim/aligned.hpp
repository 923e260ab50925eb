// 64-byte aligned allocator so field buffers share one FFTW alignment class.
#pragma once

#include <cstddef>
#include <cstdlib>
#include <new>

namespace collapsim {

template <class T, std::size_t Align = 64>
struct AlignedAllocator {
    using value_type = T;

    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U, Align>&) {}

    T* allocate(std::size_t n) {
        void* p = std::aligned_alloc(Align, ((n * sizeof(T) + Align - 1) / Align) * Align);
        if (!p) throw std::bad_alloc();
        return static_cast<T*>(p);
    }
    void deallocate(T* p, std::size_t) { std::free(p); }

    template <class U>
    bool operator==(const AlignedAllocator<U, Align>&) const { return true; }
    template <class U>
    bool operator!=(const AlignedAllocator<U, Align>&) const { return false; }

    template <class U>
    struct rebind { using other = AlignedAllocator<U, Align>; };
};

} // namespace collapsim
