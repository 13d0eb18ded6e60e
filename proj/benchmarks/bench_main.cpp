#include <benchmark/benchmark.h>

// The packaged libbenchmark_main.a carries LTO bytecode from another compiler
// release, so main comes from here and links against the shared library.
BENCHMARK_MAIN();
