// runs the acceptance criteria; optional arguments pick criterion ids

#include "qdlab/acceptance.hpp"

#include <cstdlib>
#include <iostream>
#include <set>

int main(int argc, char** argv) {
  std::set<int> pick;
  for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));
  qdlab::AcceptanceOptions opt;
  int failed = 0;
  const auto& all = qdlab::criteria();
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (!pick.empty() && !pick.count(static_cast<int>(i + 1))) continue;
    auto r = all[i](opt);
    std::cout << qdlab::pass_line(r) << std::endl;
    failed += !r.pass();
  }
  return failed ? 1 : 0;
}
