#include "mdkk/parallel.hpp"

#include <cstdlib>
#include <string>

namespace mdkk
{

std::size_t worker_count()
{
    std::size_t workers = static_cast<std::size_t>(omp_get_max_threads());
    if (const char* env = std::getenv("MDKK_THREADS")) {
        try {
            const long cap = std::stol(env);
            if (cap > 0 && static_cast<std::size_t>(cap) < workers) {
                workers = static_cast<std::size_t>(cap);
            }
        } catch (const std::exception&) {
            // ignore malformed values
        }
    }
    return workers == 0 ? 1 : workers;
}

} // namespace mdkk
