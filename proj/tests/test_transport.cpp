#include <doctest.h>

#include <cmath>
#include <random>

#include "mfac/transport.hpp"
#include "oracles.hpp"

using namespace mfac;

namespace {

ParticleEnsemble random_ensemble(std::size_t n, std::size_t d, std::mt19937_64& rng,
                                 double shift = 0.0) {
  std::normal_distribution<double> z(shift, 1.0);
  ParticleEnsemble e(n, d);
  for (double& v : e.data()) v = z(rng);
  return e;
}

}  // namespace

TEST_CASE("hungarian equals brute force on 100 random instances") {
  std::mt19937_64 rng(0);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + trial % 6;
    std::vector<double> c(n * n);
    for (double& v : c) v = u(rng);
    const auto a = hungarian(c, n);
    double summed = 0.0;
    for (std::size_t i = 0; i < n; ++i) summed += c[i * n + a.perm[i]];
    CHECK(a.cost == summed);
    CHECK(a.cost == oracle::brute_force_assignment(c, n));
  }
}

TEST_CASE("hungarian basics") {
  SUBCASE("returns a permutation") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u;
    const std::size_t n = 40;
    std::vector<double> c(n * n);
    for (double& v : c) v = u(rng);
    auto a = hungarian(c, n);
    auto sorted = a.perm;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n; ++i) CHECK(sorted[i] == i);
  }
  SUBCASE("identity on diagonal-dominant costs") {
    std::vector<double> c{0, 5, 5, 5, 0, 5, 5, 5, 0};
    auto a = hungarian(c, 3);
    CHECK(a.perm == std::vector<std::size_t>{0, 1, 2});
    CHECK(a.cost == 0.0);
  }
  SUBCASE("non-finite entries are rejected") {
    std::vector<double> c{0, NAN, 1, 0};
    CHECK_THROWS(hungarian(c, 2));
  }
}

TEST_CASE("1-d optimal matching is monotone") {
  std::mt19937_64 rng(2);
  auto a = random_ensemble(50, 1, rng);
  auto b = random_ensemble(50, 1, rng, 2.0);
  auto match = ot_match(a, b);
  for (std::size_t i = 0; i < 50; ++i)
    for (std::size_t j = 0; j < 50; ++j)
      if (a[i][0] < a[j][0]) CHECK(b[match.perm[i]][0] <= b[match.perm[j]][0]);
}

TEST_CASE("otgp endpoints are exact") {
  std::mt19937_64 rng(3);
  auto src = random_ensemble(30, 2, rng);
  auto dst = random_ensemble(30, 2, rng, 1.0);
  auto match = ot_match(src, dst);
  auto zero = otgp_apply(src, dst, match, 0.0);
  auto one = otgp_apply(src, dst, match, 1.0);
  for (std::size_t m = 0; m < 30; ++m)
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(zero[m][i] == src[m][i]);
      CHECK(one[m][i] == dst[match.perm[m]][i]);
    }
  CHECK_THROWS_WITH(otgp_apply(src, dst, match, 1.5), "geodesic overshoot");
  CHECK_THROWS_WITH(otgp_apply(src, dst, match, -0.1), "geodesic overshoot");

  auto full = otgp_update(src, dst, 0.5, 2.0);
  for (std::size_t m = 0; m < 30; ++m) CHECK(full[m][0] == dst[match.perm[m]][0]);
}

TEST_CASE("otgp moves along the geodesic") {
  std::mt19937_64 rng(4);
  auto src = random_ensemble(40, 1, rng);
  auto dst = random_ensemble(40, 1, rng, 3.0);
  const double w = w2_empirical(src, dst);
  auto mid = otgp_update(src, dst, 0.5, 0.5);  // lambda = 1/4
  CHECK(w2_empirical(src, mid) == doctest::Approx(0.25 * w).epsilon(1e-9));
  CHECK(w2_empirical(mid, dst) == doctest::Approx(0.75 * w).epsilon(1e-9));
}

TEST_CASE("empirical W2") {
  std::mt19937_64 rng(5);
  auto a = random_ensemble(100, 3, rng);
  CHECK(w2_empirical(a, a) == 0.0);
  ParticleEnsemble b = a;
  for (std::size_t m = 0; m < 100; ++m) b[m][1] += 2.0;
  CHECK(w2_empirical(a, b) == doctest::Approx(2.0).epsilon(1e-12));

  SUBCASE("subsampling is seeded") {
    auto big = random_ensemble(500, 1, rng);
    auto other = random_ensemble(500, 1, rng, 1.0);
    CHECK(w2_empirical(big, other, 200, 7) == w2_empirical(big, other, 200, 7));
    CHECK(w2_empirical(big, other, 200, 7) == doctest::Approx(1.0).epsilon(0.2));
  }
}

TEST_CASE("w2_gap translation identity") {
  std::mt19937_64 rng(6);
  const std::size_t steps = 10;
  const double h = 0.1, c = 0.7;
  std::vector<ParticleEnsemble> mu, x;
  for (std::size_t j = 0; j < steps; ++j) {
    mu.push_back(random_ensemble(50, 1, rng));
    ParticleEnsemble shifted = mu.back();
    for (double& v : shifted.data()) v += c;
    x.push_back(shifted);
  }
  CHECK(w2_gap(mu, mu, h) == 0.0);
  CHECK(w2_gap(mu, x, h) == doctest::Approx(0.5 * 1.0 * c * c).epsilon(1e-10));
}
