#pragma once

#include "qdlab/core.hpp"
#include "qdlab/partitions.hpp"

#include <boost/rational.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace qdlab {

// label 0 is the theta symbol, potential labels are 1..M
inline constexpr int THETA = 0;
using Word = std::vector<int>;

inline std::string word_string(const Word& w) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) s += ' ';
    s += w[i] == THETA ? std::string("th") : std::to_string(w[i]);
  }
  return s;
}

struct SkeletonData {
  int n = 0;
  std::vector<int> skeleton;  // 1-based
  std::vector<std::pair<int, int>> gates;
  std::vector<int> theta_indices;
  int k = 0;
  int t = 0;
  int r = 0;

  bool in_skeleton(int j) const { return std::binary_search(skeleton.begin(), skeleton.end(), j); }
};

inline SkeletonData skeleton_indices(const Word& w) {
  SkeletonData sd;
  sd.n = static_cast<int>(w.size());
  std::vector<char> in(w.size() + 2, 0);
  for (int m = 1; m <= sd.n; ++m) {
    int g = w[m - 1];
    if (g == THETA) {
      sd.theta_indices.push_back(m);
    } else if (m >= 2 && in[m - 1] && g == w[m - 2]) {
      in[m - 1] = 0;
      sd.gates.emplace_back(m - 1, m);
    } else {
      in[m] = 1;
    }
  }
  for (int m = 1; m <= sd.n; ++m)
    if (in[m]) sd.skeleton.push_back(m);
  sd.k = static_cast<int>(sd.skeleton.size());
  sd.t = static_cast<int>(sd.theta_indices.size());
  int rest = sd.n - sd.k - sd.t;
  if (rest % 2) throw std::logic_error("n-k-t odd for " + word_string(w));
  sd.r = rest / 2 + sd.t;
  return sd;
}

// one lambda^2 per gate pair and per theta
inline int lambda_power_r(const Word& w) { return skeleton_indices(w).r; }

enum class Tag { nr, last, rec, tri, nest, none };

inline const char* tag_name(Tag t) {
  switch (t) {
    case Tag::nr: return "nr";
    case Tag::last: return "last";
    case Tag::rec: return "rec";
    case Tag::tri: return "tri";
    case Tag::nest: return "nest";
    default: return "none";
  }
}

struct StoppingClass {
  Tag tag = Tag::none;
  int k = 0;
  int r = 0;
  int n = 0;
};

namespace detail {

// equal potential labels only at adjacent non-skeleton positions
inline bool nonrep_pattern(const Word& w, const SkeletonData& sd) {
  int n = static_cast<int>(w.size());
  for (int i = 1; i <= n; ++i) {
    if (w[i - 1] == THETA) continue;
    for (int j = i + 1; j <= n; ++j) {
      if (w[j - 1] != w[i - 1]) continue;
      if (j - i != 1 || sd.in_skeleton(i) || sd.in_skeleton(j)) return false;
    }
  }
  return true;
}

inline bool in_nr_set(const Word& w, const SkeletonData& sd) { return sd.r <= 2 && nonrep_pattern(w, sd); }

inline bool in_star(const Word& w, const SkeletonData& sd) {
  if (w.empty() || in_nr_set(w, sd)) return false;
  Word p(w.begin(), w.end() - 1);
  return in_nr_set(p, skeleton_indices(p));
}

inline bool tri_pred(const Word& w, const SkeletonData& sd) {
  int n = static_cast<int>(w.size());
  if (!sd.in_skeleton(n)) return false;
  for (int j = 1; j <= n - 2; ++j)
    if (!sd.in_skeleton(j) && !sd.in_skeleton(j + 1) && w[j - 1] == w[n - 1] && w[j] == w[n - 1]) return true;
  return false;
}

inline bool rec_pred(const Word& w, const SkeletonData& sd) {
  int n = static_cast<int>(w.size());
  for (int j : sd.skeleton) {
    if (j > n - 2 || w[j - 1] != w[n - 1]) continue;
    for (int s : sd.skeleton)
      if (s > j && s < n) return true;
  }
  return false;
}

inline bool nest_pred(const Word& w, const SkeletonData& sd) {
  int n = static_cast<int>(w.size());
  for (int j : sd.skeleton)
    if (j <= n - 2 && w[j - 1] == w[n - 1]) return true;
  return false;
}

}  // namespace detail

// membership flags of w in the five sets of the stopping union, evaluated literally
struct UnionMembership {
  bool nr_K = false;   // nr, k = K, r <= 1
  bool tri = false;    // r = 1
  bool rec = false;    // r <= 1
  bool nest = false;   // r = 1
  bool last = false;   // r = 2
  int count() const { return nr_K + tri + rec + nest + last; }
};

inline UnionMembership union_membership(const Word& w, int K, const SkeletonData& sd) {
  using namespace detail;
  UnionMembership m;
  if (w.empty()) return m;
  int n = static_cast<int>(w.size());
  if (in_nr_set(w, sd)) {
    m.nr_K = sd.k == K && sd.r <= 1;
    m.last = sd.r == 2 && !sd.in_skeleton(n) && sd.k <= K;
  }
  if (in_star(w, sd) && sd.k <= K) {
    bool t = tri_pred(w, sd), rc = rec_pred(w, sd), ns = nest_pred(w, sd);
    m.tri = t && sd.r == 1;
    m.rec = !t && rc && sd.r <= 1;
    m.nest = !t && !rc && ns && sd.r == 1;
  }
  return m;
}

inline StoppingClass stopping_class(const Word& w, int K) {
  auto sd = skeleton_indices(w);
  auto m = union_membership(w, K, sd);
  StoppingClass c;
  c.k = sd.k;
  c.r = sd.r;
  c.n = sd.n;
  if (m.nr_K) c.tag = Tag::nr;
  else if (m.last) c.tag = Tag::last;
  else if (m.tri) c.tag = Tag::tri;
  else if (m.rec) c.tag = Tag::rec;
  else if (m.nest) c.tag = Tag::nest;
  return c;
}

// odometer over words of fixed length over {theta, 1..M}
template <class F>
void for_each_word(int M, int len, F&& f) {
  Word w(len, 0);
  while (true) {
    f(static_cast<const Word&>(w));
    int i = len - 1;
    while (i >= 0 && w[i] == M) w[i--] = 0;
    if (i < 0) return;
    ++w[i];
  }
}

struct ExhaustivenessReport {
  int M = 0, maxlen = 0, K = 0;
  long words = 0;
  long violations = 0;
  std::vector<std::string> examples;
  long later_hits = 0;  // words with a second hitting prefix after the first (informational)
  long prefix_stability_violations = 0;
  std::map<std::string, long> tally;
};

// first hitting prefix: exists, unique set, n in [k, k+4], k <= K, all earlier prefixes nr with r <= 1, k < K
inline ExhaustivenessReport stopping_exhaustiveness_check(int M, int maxlen, int K) {
  ExhaustivenessReport rep;
  rep.M = M;
  rep.maxlen = maxlen;
  rep.K = K;
  bool need_hit = maxlen >= K + 4;
  auto violate = [&](const Word& w, const std::string& why) {
    ++rep.violations;
    if (rep.examples.size() < 20) rep.examples.push_back(word_string(w) + ": " + why);
  };
  for_each_word(M, maxlen, [&](const Word& w) {
    ++rep.words;
    int first = 0;
    std::set<int> removed;
    for (int n = 1; n <= maxlen; ++n) {
      Word p(w.begin(), w.begin() + n);
      auto sd = skeleton_indices(p);
      for (auto [a, b] : sd.gates) removed.insert(a), removed.insert(b);
      for (int j : sd.skeleton)
        if (removed.count(j)) ++rep.prefix_stability_violations;
      auto m = union_membership(p, K, sd);
      if (m.count() == 0) {
        if (!first && !(detail::in_nr_set(p, sd) && sd.r <= 1 && sd.k < K))
          violate(w, "unstopped prefix n=" + std::to_string(n) + " is not nr with r<=1, k<K");
        continue;
      }
      if (first) {
        ++rep.later_hits;
        break;
      }
      first = n;
      if (m.count() != 1) violate(w, "prefix in several sets");
      if (sd.k > K) violate(w, "k > K");
      if (n < sd.k || n > sd.k + 4) violate(w, "n outside [k, k+4]");
      rep.tally[tag_name(stopping_class(p, K).tag)]++;
    }
    if (!first && need_hit) violate(w, "no stopping prefix");
  });
  return rep;
}

// ---- core decomposition ----

struct LocationItem {
  char kind;  // 'v' recollision/nest label, 'g' gate-or-theta slot, 't' gate of a triple
  int w;
  bool operator<(const LocationItem& o) const { return std::tie(kind, w) < std::tie(o.kind, o.w); }
  bool operator==(const LocationItem& o) const { return kind == o.kind && w == o.w; }
};

struct CoreDecomposition {
  Tag tag = Tag::none;
  int n = 0, k = 0, r = 0, c = 0;
  std::vector<int> core_indices;
  std::vector<int> core_labels;
  std::vector<LocationItem> w;  // location code, in sequence order; the element ending at n is not coded
  std::string h;                // gate code over {g, T}, T = theta
  int noncore_count = 0;        // non-core potential indices plus theta indices
};

inline int expected_core_count(Tag tag, int k) {
  switch (tag) {
    case Tag::nr:
    case Tag::last: return k;
    case Tag::tri: return k - 1;
    case Tag::rec:
    case Tag::nest: return k - 2;
    default: throw domain_error("no core count for class none");
  }
}

inline CoreDecomposition core_decomposition(const Word& word, Tag tag) {
  auto sd = skeleton_indices(word);
  CoreDecomposition cd;
  cd.tag = tag;
  cd.n = sd.n;
  cd.k = sd.k;
  cd.r = sd.r;
  std::map<int, int> count;
  for (int x : word)
    if (x != THETA) count[x]++;
  for (int j : sd.skeleton)
    if (count[word[j - 1]] == 1) {
      cd.core_indices.push_back(j);
      cd.core_labels.push_back(word[j - 1]);
    }
  cd.c = static_cast<int>(cd.core_indices.size());
  if (cd.c != expected_core_count(tag, sd.k))
    throw domain_error("core count " + std::to_string(cd.c) + " does not match class " + tag_name(tag) + " for " +
                       word_string(word));
  std::set<int> gate_first;
  for (auto [a, b] : sd.gates) gate_first.insert(a);
  int n = sd.n, seen = 0;
  for (int j = 1; j <= n; ++j) {
    if (std::binary_search(cd.core_indices.begin(), cd.core_indices.end(), j)) {
      ++seen;
      continue;
    }
    ++cd.noncore_count;
    if (word[j - 1] == THETA) {
      cd.h += 'T';
      if (!(tag == Tag::last && j == n)) cd.w.push_back({'g', seen + 1});
    } else if (gate_first.count(j)) {
      ++cd.noncore_count;
      if (tag == Tag::tri && word[j - 1] == word[n - 1]) {
        cd.w.push_back({'t', seen + 1});
        cd.h += 'g';
      } else {
        cd.h += 'g';
        if (!(tag == Tag::last && j + 1 == n)) cd.w.push_back({'g', seen + 1});
      }
      ++j;
    } else if (sd.in_skeleton(j)) {
      if (j != n) cd.w.push_back({'v', seen + 1});
    } else {
      throw domain_error("unclassifiable index in " + word_string(word));
    }
  }
  if (static_cast<int>(cd.h.size()) != cd.r) throw std::logic_error("gate code length != r");
  return cd;
}

// class of a word for decomposition purposes: a stopping class, or nr when it is an unstopped nr word
inline Tag structure_of(const Word& w, int K) {
  auto c = stopping_class(w, K);
  if (c.tag != Tag::none) return c.tag;
  auto sd = skeleton_indices(w);
  if (detail::in_nr_set(w, sd) && sd.r <= 1) return Tag::nr;
  return Tag::none;
}

// location-code sets W^{(r),#}_c collected from all words of length <= maxlen
struct LocationCodeCensus {
  std::map<std::tuple<std::string, int, int>, std::set<std::vector<LocationItem>>> sets;
  long violations = 0;  // |W| > (c+1)^2
  long noncore_violations = 0;  // more than 4 non-core + theta indices
};

inline LocationCodeCensus location_code_census(int M, int maxlen, int K) {
  LocationCodeCensus cen;
  for (int len = 1; len <= maxlen; ++len)
    for_each_word(M, len, [&](const Word& w) {
      Tag t = structure_of(w, K);
      if (t == Tag::none) return;
      // only first-hitting words and nr words with r = 1 are decomposed
      for (int n = 1; n < len; ++n)
        if (stopping_class(Word(w.begin(), w.begin() + n), K).tag != Tag::none) return;
      if (t == Tag::nr && stopping_class(w, K).tag == Tag::none && lambda_power_r(w) != 1) return;
      auto cd = core_decomposition(w, t);
      if (cd.noncore_count > 4) ++cen.noncore_violations;
      cen.sets[{tag_name(t), cd.c, cd.r}].insert(cd.w);
    });
  for (auto& [key, s] : cen.sets) {
    int c = std::get<1>(key);
    if (static_cast<long>(s.size()) > static_cast<long>((c + 1) * (c + 1))) ++cen.violations;
  }
  return cen;
}

// ---- D0 and derived partitions ----

struct D0Partition {
  SetPartition P;
  std::vector<int> kind;  // per lump: 0 core pair, 1 non-core, 2 theta
  std::vector<int> side;  // per lump: 0 both, 1 plain, 2 tilde
  int n = 0, n_tilde = 0;
};

namespace detail {

// symbol per position: >0 core index j, -1 nu, -2 mu, -3 second gate label, 0 theta
inline std::vector<int> build_side(Tag tag, int c, const std::vector<LocationItem>& w, const std::string& h) {
  int nv = 0, ng = 0, nt = 0;
  for (auto& it : w) {
    if (it.w < 1 || it.w > c + 1) throw domain_error("location out of range");
    nv += it.kind == 'v';
    ng += it.kind == 'g';
    nt += it.kind == 't';
  }
  for (std::size_t i = 1; i < w.size(); ++i)
    if (w[i].w < w[i - 1].w) throw domain_error("location code not in sequence order");
  for (char x : h)
    if (x != 'g' && x != 'T') throw domain_error("gate code must be over {g, T}");
  bool ok = false;
  switch (tag) {
    case Tag::nr: ok = nv == 0 && nt == 0 && ng == static_cast<int>(h.size()) && h.size() <= 1; break;
    case Tag::last: ok = nv == 0 && nt == 0 && ng == 1 && h.size() == 2; break;
    case Tag::rec: ok = nv == 1 && nt == 0 && ng == static_cast<int>(h.size()) && h.size() <= 1; break;
    case Tag::nest:
      ok = nv == 1 && nt == 0 && ng == 1 && h.size() == 1 && w.size() == 2 && w[0].kind == 'v' &&
           w[0].w == c + 1 && w[1].w == c + 1;
      break;
    case Tag::tri: ok = nv == 0 && ng == 0 && nt == 1 && h == "g"; break;
    default: ok = false;
  }
  if (!ok) throw domain_error(std::string("location/gate code inconsistent with class ") + tag_name(tag));
  std::vector<int> s;
  std::size_t hi = 0, it = 0;
  int gate_label = -2;
  auto slot = [&](char code) {
    if (code == 'g') {
      s.push_back(gate_label);
      s.push_back(gate_label);
    } else {
      s.push_back(0);
    }
    gate_label = -3;
  };
  for (int g = 1; g <= c + 1; ++g) {
    while (it < w.size() && w[it].w == g) {
      char k = w[it].kind;
      if (k == 'v') s.push_back(-1);
      else if (k == 't') {
        s.push_back(-2);
        s.push_back(-2);
        ++hi;
      } else slot(h[hi++]);
      ++it;
    }
    if (g <= c) s.push_back(g);
  }
  if (tag == Tag::rec || tag == Tag::nest) s.push_back(-1);
  if (tag == Tag::tri) s.push_back(-2);
  if (tag == Tag::last) slot(h[hi++]);
  return s;
}

}  // namespace detail

// sigma[j-1] = sigma(j), a permutation of 1..c; tilde indices are stored negated
inline D0Partition build_D0(Tag tag, int c, const std::vector<int>& sigma, const std::vector<LocationItem>& w,
                            const std::string& h, const std::string& h_tilde) {
  if (static_cast<int>(sigma.size()) != c) throw domain_error("sigma size != c");
  {
    auto s = sigma;
    std::sort(s.begin(), s.end());
    for (int j = 0; j < c; ++j)
      if (s[j] != j + 1) throw domain_error("sigma is not a permutation");
  }
  auto a = detail::build_side(tag, c, w, h);
  auto b = detail::build_side(tag, c, w, h_tilde);
  D0Partition d;
  d.n = static_cast<int>(a.size());
  d.n_tilde = static_cast<int>(b.size());
  std::vector<int> pos_a(c + 1), pos_b(c + 1);
  for (int i = 0; i < d.n; ++i)
    if (a[i] > 0) pos_a[a[i]] = i + 1;
  for (int i = 0; i < d.n_tilde; ++i)
    if (b[i] > 0) pos_b[b[i]] = i + 1;
  for (int j = 1; j <= c; ++j) {
    d.P.lumps.push_back({pos_a[j], -pos_b[sigma[j - 1]]});
    d.kind.push_back(0);
    d.side.push_back(0);
  }
  auto side_blocks = [&](const std::vector<int>& s, int sign, int sd) {
    for (int lab : {-1, -2, -3}) {
      std::vector<int> blk;
      for (std::size_t i = 0; i < s.size(); ++i)
        if (s[i] == lab) blk.push_back(sign * static_cast<int>(i + 1));
      if (!blk.empty()) {
        d.P.lumps.push_back(blk);
        d.kind.push_back(1);
        d.side.push_back(sd);
      }
    }
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] == 0) {
        d.P.lumps.push_back({sign * static_cast<int>(i + 1)});
        d.kind.push_back(2);
        d.side.push_back(sd);
      }
  };
  side_blocks(a, 1, 1);
  side_blocks(b, -1, 2);
  for (auto& l : d.P.lumps) std::sort(l.begin(), l.end());
  return d;
}

struct DerivedPartition {
  SetPartition P;
  int rho4 = 0;
  int rho6 = 0;
};

// lump plain non-core elements with tilde non-core elements, at most one partner each
inline std::vector<DerivedPartition> derived_partitions(const D0Partition& d0) {
  std::vector<int> A, B, fixed;
  for (std::size_t i = 0; i < d0.P.lumps.size(); ++i) {
    if (d0.kind[i] == 1 && d0.side[i] == 1) A.push_back(static_cast<int>(i));
    else if (d0.kind[i] == 1 && d0.side[i] == 2) B.push_back(static_cast<int>(i));
    else fixed.push_back(static_cast<int>(i));
  }
  std::vector<DerivedPartition> out;
  std::vector<int> match(A.size(), -1);
  std::vector<char> used(B.size(), 0);
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == A.size()) {
      DerivedPartition dp;
      for (int f : fixed) dp.P.lumps.push_back(d0.P.lumps[f]);
      for (std::size_t a = 0; a < A.size(); ++a) {
        auto blk = d0.P.lumps[A[a]];
        if (match[a] >= 0) {
          auto& o = d0.P.lumps[B[match[a]]];
          blk.insert(blk.end(), o.begin(), o.end());
        }
        dp.P.lumps.push_back(blk);
      }
      for (std::size_t b = 0; b < B.size(); ++b)
        if (!used[b]) dp.P.lumps.push_back(d0.P.lumps[B[b]]);
      for (auto& l : dp.P.lumps) {
        dp.rho4 += l.size() == 4;
        dp.rho6 += l.size() == 6;
      }
      dp.P.normalize();
      out.push_back(dp);
      return;
    }
    match[i] = -1;
    rec(i + 1);
    for (std::size_t b = 0; b < B.size(); ++b) {
      if (used[b]) continue;
      used[b] = 1;
      match[i] = static_cast<int>(b);
      rec(i + 1);
      used[b] = 0;
      match[i] = -1;
    }
  };
  rec(0);
  return out;
}

// ---- Moebius identity ----

struct MoebiusReport {
  int k = 0, M = 0;
  std::int64_t lhs = 0, rhs = 0;
  bool identity_ok = false;
  long partitions = 0;
  long bound_checked = 0;
  long bound_violations = 0;
};

// sum over pairwise distinct labels == sum_A c(A) sum over labels constant on lumps
inline MoebiusReport moebius_identity_check(int k, int M, std::uint64_t seed, int bound_max = 6) {
  MoebiusReport rep;
  rep.k = k;
  rep.M = M;
  std::size_t total = 1;
  for (int i = 0; i < k; ++i) total *= static_cast<std::size_t>(M);
  auto rng = stream(seed, 0);
  std::uniform_int_distribution<int> U(-50, 50);
  std::vector<std::int64_t> f(total);
  for (auto& x : f) x = U(rng);
  auto index = [&](const std::vector<int>& g) {
    std::size_t idx = 0;
    for (int i = 0; i < k; ++i) idx = idx * M + g[i];
    return idx;
  };
  std::vector<int> g(k, 0);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t x = idx;
    for (int i = k - 1; i >= 0; --i) {
      g[i] = static_cast<int>(x % M);
      x /= M;
    }
    std::set<int> s(g.begin(), g.end());
    if (static_cast<int>(s.size()) == k) rep.lhs += f[idx];
  }
  for_each_rgs(k, [&](const std::vector<int>& a, int nb) {
    ++rep.partitions;
    SetPartition A;
    A.lumps.assign(nb, {});
    for (int i = 0; i < k; ++i) A.lumps[a[i]].push_back(i);
    std::int64_t c = partition_moebius_coeff(A);
    std::vector<int> lab(nb, 0);
    std::int64_t s = 0;
    while (true) {
      for (int i = 0; i < k; ++i) g[i] = lab[a[i]];
      s += f[index(g)];
      int i = nb - 1;
      while (i >= 0 && lab[i] == M - 1) lab[i--] = 0;
      if (i < 0) break;
      ++lab[i];
    }
    rep.rhs += c * s;
  });
  rep.identity_ok = rep.lhs == rep.rhs;
  for (int m = 1; m <= bound_max; ++m)
    for (auto& A : all_partitions(m)) {
      ++rep.bound_checked;
      if (static_cast<double>(std::abs(partition_moebius_coeff(A))) > moebius_bound(A)) ++rep.bound_violations;
    }
  return rep;
}

// ---- permutations ----

inline int non_fixed_points(const std::vector<int>& sigma) {
  int c = 0;
  for (std::size_t i = 0; i < sigma.size(); ++i) c += sigma[i] != static_cast<int>(i + 1);
  return c;
}

// max(deg sigma, s(A)/2), deg = number of non-fixed points
inline boost::rational<int> joint_degree(const SetPartition& A, const std::vector<int>& sigma) {
  boost::rational<int> a(non_fixed_points(sigma)), b(A.degree(), 2);
  return std::max(a, b);
}

struct PermutationCensus {
  int k = 0;
  std::vector<long> count_by_fixed;  // index l = number of fixed points
  int fitted_C = 0;
};

// smallest integer C with #{sigma : l fixed points} <= (C k)^{k-l+1} for all l
inline PermutationCensus permutation_degree_census(int k) {
  PermutationCensus pc;
  pc.k = k;
  pc.count_by_fixed.assign(k + 1, 0);
  std::vector<int> s(k);
  for (int i = 0; i < k; ++i) s[i] = i + 1;
  do {
    pc.count_by_fixed[k - non_fixed_points(s)]++;
  } while (std::next_permutation(s.begin(), s.end()));
  for (int C = 1;; ++C) {
    bool ok = true;
    for (int l = 0; l <= k; ++l)
      if (static_cast<double>(pc.count_by_fixed[l]) > std::pow(static_cast<double>(C) * k, k - l + 1)) ok = false;
    if (ok) {
      pc.fitted_C = C;
      break;
    }
  }
  return pc;
}

}  // namespace qdlab
