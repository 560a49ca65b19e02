#pragma once

#include <cstddef>
#include <span>

namespace gps {

// Applies the GPS_WORKERS cap (if set) to the OpenMP runtime. Idempotent.
void configure_workers();

int worker_count();

// Fixed-shape pairwise reduction; result depends only on the input order.
template <class T>
T pairwise_sum(std::span<const T> v)
{
    if(v.size() <= 8) {
        T s{};
        for(const T& x : v) s += x;
        return s;
    }
    std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

} // namespace gps
