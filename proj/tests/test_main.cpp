#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <omp.h>

int main(int argc, char** argv)
{
    // Oversubscribe so concurrent strategies really interleave even on a
    // single-core machine.
    omp_set_num_threads(4);
    doctest::Context context(argc, argv);
    return context.run();
}
