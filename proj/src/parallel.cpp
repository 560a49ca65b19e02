#include "gps/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <mutex>
#include <string>

namespace gps {

void configure_workers()
{
    static std::once_flag once;
    std::call_once(once, [] {
        const char* env = std::getenv("GPS_WORKERS");
        if(env == nullptr) return;
        char* end = nullptr;
        long n = std::strtol(env, &end, 10);
        if(end != env && n > 0) omp_set_num_threads(static_cast<int>(n));
    });
}

int worker_count()
{
    configure_workers();
    return omp_get_max_threads();
}

} // namespace gps
