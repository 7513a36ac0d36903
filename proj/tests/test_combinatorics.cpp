#include "qdlab/combinatorics.hpp"
#include "qdlab/duhamel.hpp"

#include <gtest/gtest.h>

using namespace qdlab;

namespace {
constexpr int a = 1, b = 2, c = 3, d = 4, e = 5, f = 6;
constexpr int th = THETA;
}  // namespace

TEST(Skeleton, LongExampleWord) {
  auto sd = skeleton_indices({a, th, a, b, b, c, d, d, th, th, e, e, f});
  EXPECT_EQ(sd.skeleton, (std::vector<int>{1, 3, 6, 13}));
  Word w{a, th, a, b, b, c, d, d, th, th, e, e, f};
  std::vector<int> labels;
  for (int j : sd.skeleton) labels.push_back(w[j - 1]);
  EXPECT_EQ(labels, (std::vector<int>{a, a, c, f}));
}

TEST(Skeleton, RunOfThree) {
  auto sd = skeleton_indices({a, b, b, c, c, c});
  EXPECT_EQ(sd.skeleton, (std::vector<int>{1, 6}));
  EXPECT_EQ(sd.gates.size(), 2u);
}

TEST(Skeleton, ThetaOnly) {
  auto sd = skeleton_indices({th});
  EXPECT_TRUE(sd.skeleton.empty());
  EXPECT_EQ(sd.r, 1);
}

TEST(Skeleton, PowerR) {
  EXPECT_EQ(lambda_power_r({a, b, b, c}), 1);
  EXPECT_EQ(lambda_power_r({a, th, b}), 1);
  EXPECT_EQ(lambda_power_r({a, b, b, th, c, c}), 3);
  EXPECT_EQ(lambda_power_r({}), 0);
}

TEST(Skeleton, IndexSetsPartitionAllWords) {
  for (int len = 0; len <= 7; ++len)
    for_each_word(3, len, [&](const Word& w) {
      auto sd = skeleton_indices(w);
      std::vector<int> all = sd.skeleton;
      all.insert(all.end(), sd.theta_indices.begin(), sd.theta_indices.end());
      for (auto [x, y] : sd.gates) {
        all.push_back(x);
        all.push_back(y);
        ASSERT_EQ(y, x + 1);
      }
      std::sort(all.begin(), all.end());
      for (int i = 0; i < len; ++i) ASSERT_EQ(all[i], i + 1) << word_string(w);
      ASSERT_EQ(static_cast<int>(all.size()), len);
      ASSERT_GE(sd.r, 0);
    });
}

// gate indices of a prefix never come back into the skeleton of any extension
TEST(Skeleton, PrefixStability) {
  for_each_word(3, 8, [&](const Word& w) {
    std::set<int> removed;
    for (int n = 1; n <= 8; ++n) {
      auto sd = skeleton_indices(Word(w.begin(), w.begin() + n));
      for (int j : sd.skeleton) ASSERT_FALSE(removed.count(j)) << word_string(w);
      for (auto [x, y] : sd.gates) removed.insert(x), removed.insert(y);
    }
  });
}

TEST(Stopping, Examples) {
  auto r = stopping_class({a, b, a}, 3);
  EXPECT_EQ(r.tag, Tag::rec);
  EXPECT_EQ(r.k, 3);
  EXPECT_EQ(r.r, 0);
  auto n = stopping_class({a, b, b, a}, 2);
  EXPECT_EQ(n.tag, Tag::nest);
  EXPECT_EQ(n.k, 2);
  EXPECT_EQ(n.r, 1);
  auto t = stopping_class({a, b, b, b}, 2);
  EXPECT_EQ(t.tag, Tag::tri);
  EXPECT_EQ(t.k, 2);
  EXPECT_EQ(t.r, 1);
}

TEST(Stopping, NonRepetitiveAndLast) {
  EXPECT_EQ(stopping_class({a, b}, 2).tag, Tag::nr);
  EXPECT_EQ(stopping_class({a}, 2).tag, Tag::none);
  EXPECT_EQ(stopping_class({a, th, b, b}, 3).tag, Tag::last);
  EXPECT_EQ(stopping_class({a, th, th}, 3).tag, Tag::last);
  EXPECT_EQ(stopping_class({a, th, th, b}, 3).tag, Tag::none);
}

TEST(Stopping, ExhaustiveSmall) {
  auto rep = stopping_exhaustiveness_check(2, 8, 2);
  EXPECT_EQ(rep.violations, 0) << (rep.examples.empty() ? "" : rep.examples.front());
  EXPECT_EQ(rep.prefix_stability_violations, 0);
  EXPECT_EQ(rep.words, 6561);
}

TEST(Stopping, DegenerateAlphabet) {
  for (int K = 1; K <= 2; ++K) {
    auto rep = stopping_exhaustiveness_check(1, 8, K);
    EXPECT_EQ(rep.violations, 0) << (rep.examples.empty() ? "" : rep.examples.front());
  }
}

TEST(Stopping, ClassesDisjoint) {
  for (int len = 1; len <= 6; ++len)
    for_each_word(3, len, [&](const Word& w) {
      for (int K = 1; K <= 3; ++K) ASSERT_LE(union_membership(w, K, skeleton_indices(w)).count(), 1)
                                        << word_string(w);
    });
}

TEST(Core, Examples) {
  auto r = core_decomposition({a, b, a}, Tag::rec);
  EXPECT_EQ(r.core_indices, std::vector<int>{2});
  EXPECT_EQ(r.c, 1);
  auto g = core_decomposition({a, b, b, c}, Tag::nr);
  EXPECT_EQ(g.core_indices, (std::vector<int>{1, 4}));
  EXPECT_EQ(g.h, "g");
  ASSERT_EQ(g.w.size(), 1u);
  EXPECT_EQ(g.w[0].w, 2);
  auto t = core_decomposition({a, th, b}, Tag::nr);
  EXPECT_EQ(t.core_indices, (std::vector<int>{1, 3}));
  EXPECT_EQ(t.h, "T");
}

TEST(Core, MismatchThrows) { EXPECT_THROW(core_decomposition({a, b, a}, Tag::nr), domain_error); }

TEST(Core, LocationCodeCardinality) {
  auto cen = location_code_census(3, 7, 3);
  EXPECT_EQ(cen.violations, 0);
  EXPECT_EQ(cen.noncore_violations, 0);
  EXPECT_FALSE(cen.sets.empty());
}

TEST(D0, RecollisionWithGate) {
  // c = 2, nu before core 1, gate after core 2
  std::vector<LocationItem> w{{'v', 1}, {'g', 3}};
  auto d0 = build_D0(Tag::rec, 2, {1, 2}, w, "g", "g");
  EXPECT_EQ(d0.n, 6);
  int w1 = 1, w2 = 3, n = d0.n;
  auto has = [&](std::vector<int> blk) {
    std::sort(blk.begin(), blk.end());
    return std::find(d0.P.lumps.begin(), d0.P.lumps.end(), blk) != d0.P.lumps.end();
  };
  EXPECT_TRUE(has({w1, n}));
  EXPECT_TRUE(has({w2 + 1, w2 + 2}));
  EXPECT_TRUE(has({-w1, -n}));
  EXPECT_TRUE(has({-(w2 + 1), -(w2 + 2)}));
  EXPECT_TRUE(has({2, -2}));
  EXPECT_TRUE(has({3, -3}));
  std::vector<int> all;
  for (int i = 1; i <= 6; ++i) all.push_back(i), all.push_back(-i);
  EXPECT_TRUE(d0.P.is_exact_cover_of(all));
}

TEST(D0, NonRepetitiveOnlyCores) {
  auto d0 = build_D0(Tag::nr, 3, {2, 3, 1}, {}, "", "");
  EXPECT_EQ(d0.P.lumps.size(), 3u);
  for (auto& l : d0.P.lumps) EXPECT_EQ(l.size(), 2u);
  EXPECT_EQ(derived_partitions(d0).size(), 1u);
}

TEST(D0, ThetaIsSingleton) {
  auto d0 = build_D0(Tag::nr, 2, {1, 2}, {{'g', 2}}, "T", "g");
  int singles = 0;
  for (std::size_t i = 0; i < d0.P.lumps.size(); ++i)
    if (d0.kind[i] == 2) {
      ++singles;
      EXPECT_EQ(d0.P.lumps[i].size(), 1u);
    }
  EXPECT_EQ(singles, 1);
}

TEST(D0, InconsistentCodes) {
  EXPECT_THROW(build_D0(Tag::rec, 2, {1, 2}, {{'g', 3}}, "g", "g"), domain_error);
  EXPECT_THROW(build_D0(Tag::tri, 2, {1, 2}, {{'t', 1}}, "T", "g"), domain_error);
  EXPECT_THROW(build_D0(Tag::nr, 2, {1, 1}, {}, "", ""), domain_error);
}

TEST(Derived, RecGateSeven) {
  auto d0 = build_D0(Tag::rec, 2, {2, 1}, {{'v', 1}, {'g', 3}}, "g", "g");
  auto ds = derived_partitions(d0);
  EXPECT_EQ(ds.size(), 7u);
  for (auto& dp : ds) {
    EXPECT_LE(dp.rho4, 2);
    EXPECT_LE(dp.rho6, 1);
  }
  EXPECT_EQ(ds.front().P, d0.P);
}

TEST(Derived, CountsBoundedAllClasses) {
  std::vector<std::tuple<Tag, std::vector<LocationItem>, std::string>> cases{
      {Tag::nr, {{'g', 1}}, "g"},          {Tag::rec, {{'v', 1}}, ""},
      {Tag::nest, {{'v', 3}, {'g', 3}}, "g"}, {Tag::tri, {{'t', 2}}, "g"},
      {Tag::last, {{'g', 1}}, "gg"},       {Tag::last, {{'g', 2}}, "gT"}};
  for (auto& [tag, w, h] : cases) {
    auto d0 = build_D0(tag, 2, {1, 2}, w, h, h);
    for (auto& dp : derived_partitions(d0)) {
      EXPECT_LE(dp.rho4, 2) << tag_name(tag);
      EXPECT_LE(dp.rho6, 1) << tag_name(tag);
    }
  }
}

TEST(Moebius, Coefficients) {
  SetPartition singles{{{1}, {2}, {3}}};
  EXPECT_EQ(partition_moebius_coeff(singles), 1);
  EXPECT_EQ(partition_moebius_coeff(SetPartition{{{1, 2}, {3}}}), -1);
  EXPECT_EQ(partition_moebius_coeff(SetPartition{{{1, 2, 3}}}), 2);
  EXPECT_EQ(partition_moebius_coeff(SetPartition{{{1, 2, 3, 4}}}), -6);
}

TEST(Moebius, IdentityExact) {
  for (int k = 1; k <= 5; ++k)
    for (int M : {2, 3, 6}) {
      auto rep = moebius_identity_check(k, M, 11 + k * 7 + M);
      EXPECT_TRUE(rep.identity_ok) << k << " " << M << ": " << rep.lhs << " vs " << rep.rhs;
      EXPECT_EQ(rep.bound_violations, 0);
    }
}

TEST(Moebius, TwoElementInclusionExclusion) {
  auto rep = moebius_identity_check(2, 4, 3);
  EXPECT_TRUE(rep.identity_ok);
  EXPECT_EQ(rep.partitions, 2);
}

TEST(Moebius, BellNumbers) {
  std::vector<std::size_t> bell{1, 1, 2, 5, 15, 52, 203};
  for (int k = 0; k <= 6; ++k) EXPECT_EQ(all_partitions(k).size(), bell[k]);
}

TEST(JointDegree, Examples) {
  SetPartition trivial{{{1}, {2}, {3}, {4}}};
  using Q = boost::rational<int>;
  EXPECT_TRUE(joint_degree(trivial, {1, 2, 3, 4}) == Q(0));
  EXPECT_TRUE(joint_degree(trivial, {2, 1, 3, 4}) == Q(2));
  EXPECT_TRUE(joint_degree(SetPartition{{{1, 2}, {3}, {4}}}, {1, 2, 3, 4}) == Q(1));
  EXPECT_TRUE(joint_degree(SetPartition{{{1, 2, 3}, {4}}}, {1, 2, 3, 4}) == Q(3, 2));
}

TEST(Permutations, Census) {
  auto p4 = permutation_degree_census(4);
  EXPECT_EQ(p4.count_by_fixed[4], 1);
  EXPECT_EQ(p4.count_by_fixed[2], 6);
  for (int k = 1; k <= 8; ++k) {
    auto p = permutation_degree_census(k);
    long total = 0;
    for (long x : p.count_by_fixed) total += x;
    long fact = 1;
    for (int i = 2; i <= k; ++i) fact *= i;
    EXPECT_EQ(total, fact);
    EXPECT_LE(p.fitted_C, 2) << k;
  }
}

TEST(Duhamel, ChebyshevCumulativeIntegral) {
  ChebIntegrator ch(32, 2.0);
  Eigen::VectorXd f(ch.n), F(ch.n);
  for (int j = 0; j < ch.n; ++j) {
    f[j] = std::cos(3 * ch.s[j]);
    F[j] = std::sin(3 * ch.s[j]) / 3;
  }
  EXPECT_LT((ch.Q * f - F).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Duhamel, ZeroCouplingIsFree) {
  auto m = random_duhamel_model(6, 2, 0.0, 5);
  CVec exact = exact_evolution(m, 1.5);
  CVec free = (m.h0.cast<cplx>() * cplx(0, -1.5)).array().exp().matrix().asDiagonal() * m.psi0;
  EXPECT_LT((exact - free).norm(), 1e-14);
  auto rep = duhamel_matrix_check(6, 3, 1.5, 5, 2, 2, 0.0);
  EXPECT_LT(rep.residual, 1e-12);
}

TEST(Duhamel, SingleRemainder) {
  auto rep = duhamel_matrix_check(8, 1, 2.0, 17);
  EXPECT_LT(rep.residual, 1e-10);
}

TEST(Duhamel, ExpansionAndRegrouping) {
  for (int N = 1; N <= 4; ++N) {
    auto rep = duhamel_matrix_check(12, N, 2.0, 100 + N);
    EXPECT_LT(rep.residual, 1e-8) << N;
    EXPECT_LT(rep.van_loan_gap, 1e-10) << N;
    EXPECT_LT(rep.regroup_gap, 1e-10) << N;
    EXPECT_GT(rep.stopped_leaves, 0);
  }
}

TEST(Duhamel, WordTermMatchesBlockExponential) {
  auto m = random_duhamel_model(5, 3, 0.4, 9);
  DuhamelEngine eng(m, 1.3);
  Word w{1, THETA, 2};
  Traj phi = eng.start();
  for (int g : w) phi = eng.step(phi, m.W(g));
  EXPECT_LT((eng.at_t(phi) - van_loan_term(m, w, 1.3)).norm(), 1e-12);
  Traj p2 = eng.start();
  p2 = eng.step(p2, m.W(1));
  EXPECT_LT((eng.remainder(p2, m.W(3)) - van_loan_term(m, {1, 3}, 1.3, true)).norm(), 1e-12);
}
