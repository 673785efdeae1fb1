#include "mfac/transport.hpp"

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace mfac {

Assignment hungarian(std::span<const double> costs, std::size_t n) {
  require(n >= 1, "hungarian: empty problem");
  require(costs.size() == n * n, "hungarian: cost matrix is not n x n");
  for (double c : costs)
    if (!std::isfinite(c)) throw std::invalid_argument("hungarian: non-finite cost");

  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based rows/columns; column 0 is a virtual source.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      const double* row = costs.data() + (i0 - 1) * n - 1;
      const double ui0 = u[i0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = row[j] - ui0 - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  Assignment out;
  out.perm.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) out.perm[p[j] - 1] = j - 1;
  for (std::size_t m = 0; m < n; ++m) out.cost += costs[m * n + out.perm[m]];
  return out;
}

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

ParticleEnsemble subsample(EnsembleView ens, std::size_t count, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(ens.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  ParticleEnsemble out(count, ens.dim());
  for (std::size_t i = 0; i < count; ++i) {
    const auto p = ens[idx[i]];
    std::copy(p.begin(), p.end(), out[i].begin());
  }
  return out;
}

}  // namespace

Assignment ot_match(EnsembleView source, EnsembleView target) {
  require(source.size() == target.size(), "ot_match: ensembles differ in size");
  require(source.dim() == target.dim(), "ot_match: ensembles differ in dimension");
  require(!source.empty(), "ot_match: empty ensembles");
  const std::size_t n = source.size();
  std::vector<double> costs(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) costs[i * n + j] = sq_dist(source[i], target[j]);
  return hungarian(costs, n);
}

ParticleEnsemble otgp_apply(EnsembleView source, EnsembleView target, const Assignment& match,
                            double lambda) {
  require(source.size() == target.size() && source.dim() == target.dim(),
          "otgp: ensemble shape mismatch");
  require(match.perm.size() == source.size(), "otgp: assignment size mismatch");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("geodesic overshoot");
  ParticleEnsemble out(source.size(), source.dim());
  for (std::size_t m = 0; m < source.size(); ++m) {
    const auto l = source[m];
    const auto t = target[match.perm[m]];
    auto q = out[m];
    for (std::size_t i = 0; i < q.size(); ++i) {
      if (lambda == 0.0) q[i] = l[i];
      else if (lambda == 1.0) q[i] = t[i];
      else q[i] = lambda * t[i] + (1.0 - lambda) * l[i];
    }
  }
  return out;
}

ParticleEnsemble otgp_update(EnsembleView lmc, EnsembleView target, double dtau, double beta_mu) {
  const double lambda = dtau * beta_mu;
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("geodesic overshoot");
  return otgp_apply(lmc, target, ot_match(lmc, target), lambda);
}

double w2_empirical(EnsembleView a, EnsembleView b, std::size_t max_points, std::uint64_t seed) {
  require(!a.empty() && !b.empty(), "w2: empty ensemble");
  require(a.dim() == b.dim(), "w2: ensembles differ in dimension");
  require(max_points > 0, "w2: max_points must be positive");
  const std::size_t n = std::min({a.size(), b.size(), max_points});
  auto rng = make_stream(StreamKey{seed, Stream::kSubsample});
  ParticleEnsemble sa = a.size() > n ? subsample(a, n, rng) : ParticleEnsemble(a);
  ParticleEnsemble sb = b.size() > n ? subsample(b, n, rng) : ParticleEnsemble(b);
  require(sa.size() == sb.size(), "w2: size mismatch after subsampling");
  const Assignment match = ot_match(sa, sb);
  return std::sqrt(match.cost / static_cast<double>(n));
}

double w2_gap(std::span<const ParticleEnsemble> measures,
              std::span<const ParticleEnsemble> samples, double step, std::uint64_t seed) {
  require(measures.size() == samples.size(), "w2_gap: need matching step counts");
  std::vector<double> w2(measures.size());
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, measures.size()),
                    [&](const tbb::blocked_range<std::size_t>& r) {
                      for (std::size_t j = r.begin(); j < r.end(); ++j) {
                        const double w = w2_empirical(measures[j], samples[j], 200, seed + j);
                        w2[j] = w * w;
                      }
                    });
  double total = 0.0;
  for (double v : w2) total += v;
  return 0.5 * step * total;
}

}  // namespace mfac
