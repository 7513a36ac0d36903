#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <vector>

namespace qdlab {

// blocks over an arbitrary int index set, each block sorted, blocks sorted by first element
struct SetPartition {
  std::vector<std::vector<int>> lumps;

  void normalize() {
    for (auto& b : lumps) std::sort(b.begin(), b.end());
    std::sort(lumps.begin(), lumps.end());
  }
  std::vector<int> sizes() const {
    std::vector<int> s;
    for (auto& b : lumps) s.push_back(static_cast<int>(b.size()));
    return s;
  }
  std::vector<int> elements() const {
    std::vector<int> e;
    for (auto& b : lumps) e.insert(e.end(), b.begin(), b.end());
    std::sort(e.begin(), e.end());
    return e;
  }
  bool is_exact_cover_of(std::vector<int> set) const {
    std::sort(set.begin(), set.end());
    return elements() == set;
  }
  // union of the nontrivial lumps
  int degree() const {
    int s = 0;
    for (auto& b : lumps)
      if (b.size() >= 2) s += static_cast<int>(b.size());
    return s;
  }
  int lump_of(int x) const {
    for (std::size_t i = 0; i < lumps.size(); ++i)
      if (std::find(lumps[i].begin(), lumps[i].end(), x) != lumps[i].end()) return static_cast<int>(i);
    return -1;
  }
  bool operator==(const SetPartition& o) const {
    SetPartition a = *this, b = o;
    a.normalize();
    b.normalize();
    return a.lumps == b.lumps;
  }
};

// restricted growth strings: calls f with block index of each of 0..k-1
inline void for_each_rgs(int k, const std::function<void(const std::vector<int>&, int nblocks)>& f) {
  if (k == 0) {
    f({}, 0);
    return;
  }
  std::vector<int> a(k, 0), mx(k, 0);
  while (true) {
    f(a, mx[k - 1] + 1);
    int i = k - 1;
    while (i > 0 && a[i] == mx[i - 1] + 1) --i;
    if (i == 0) return;
    ++a[i];
    mx[i] = std::max(mx[i - 1], a[i]);
    for (int j = i + 1; j < k; ++j) {
      a[j] = 0;
      mx[j] = mx[i];
    }
  }
}

// all partitions of {1..k}
inline std::vector<SetPartition> all_partitions(int k) {
  std::vector<SetPartition> out;
  for_each_rgs(k, [&](const std::vector<int>& a, int nb) {
    SetPartition p;
    p.lumps.assign(nb, {});
    for (int i = 0; i < k; ++i) p.lumps[a[i]].push_back(i + 1);
    out.push_back(p);
  });
  return out;
}

// connected-graph (Moebius) coefficient: prod (-1)^{a-1} (a-1)!
inline std::int64_t partition_moebius_coeff(const SetPartition& A) {
  std::int64_t c = 1;
  for (auto& b : A.lumps) {
    std::int64_t a = static_cast<std::int64_t>(b.size());
    std::int64_t f = 1;
    for (std::int64_t i = 2; i < a; ++i) f *= i;
    c *= ((a - 1) % 2 ? -1 : 1) * f;
  }
  return c;
}

inline double moebius_bound(const SetPartition& A) {
  double b = 1;
  for (auto& l : A.lumps) {
    double a = static_cast<double>(l.size());
    b *= std::pow(a, a - 2);
  }
  return b;
}

}  // namespace qdlab
