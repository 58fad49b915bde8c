#include <cstdio>
#include <cstdlib>
#include <string>

#include "toralmix/acceptance.hpp"

// Prints one line per criterion; exit status 0 only when every row passes.
// Optional arguments restrict the run to the listed criterion ids.
int main(int argc, char** argv) {
  toralmix::AcceptanceOptions opt;
  for (int i = 1; i < argc; ++i) opt.only.push_back(std::atoi(argv[i]));
  opt.progress = [](const toralmix::AcceptanceRow& r) {
    std::printf("[%s] %2d %-32s %s | tol %s | %.1fs\n", r.pass ? "PASS" : "FAIL", r.id, r.name.c_str(), r.measured.c_str(),
                r.tolerance.c_str(), r.seconds);
    if (!r.detail.empty()) std::printf("       %s\n", r.detail.c_str());
    std::fflush(stdout);
  };
  const auto rows = toralmix::run_acceptance(opt);
  int failed = 0;
  double total = 0.0;
  for (const auto& r : rows) failed += !r.pass, total += r.seconds;
  std::printf("%zu criteria, %d failed, %.1fs\n", rows.size(), failed, total);
  return failed ? 1 : 0;
}
