#include "mfac/langevin.hpp"

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include <cmath>
#include <random>
#include <string>

namespace mfac {

void LmcConfig::validate() const {
  require(steps > 0, "lmc: need at least one step");
  require(std::isfinite(step_size) && step_size > 0.0, "lmc: step size must be positive");
}

namespace {

constexpr double kEscape = 1e6;

// Advances one chain in place.
template <class Score>
void run_chain(const Score& score, std::span<double> x, const LmcConfig& cfg,
               std::mt19937_64& rng, std::size_t particle) {
  std::normal_distribution<double> normal;
  const double h = cfg.step_size;
  const double sqrt_h = std::sqrt(h);
  std::vector<double> s(x.size());
  for (std::size_t k = 0; k < cfg.steps; ++k) {
    score(std::span<const double>(x), std::span<double>(s));
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += 0.5 * h * s[i] + sqrt_h * normal(rng);
    for (double v : x)
      if (!(std::abs(v) <= kEscape))
        throw NumericalError("lmc: chain " + std::to_string(particle) + " diverged at step " +
                             std::to_string(k + 1));
  }
}

template <class Score>
ParticleEnsemble sample_impl(const Score& score, const ParticleEnsemble& init,
                             const LmcConfig& cfg, const StreamKey& key) {
  cfg.validate();
  ParticleEnsemble out = init;
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, init.size()),
                    [&](const tbb::blocked_range<std::size_t>& r) {
                      for (std::size_t m = r.begin(); m < r.end(); ++m) {
                        auto rng = make_stream(key.with(key.a, key.b, m));
                        run_chain(score, out[m], cfg, rng, m);
                      }
                    });
  return out;
}

}  // namespace

ParticleEnsemble lmc_sample(const ScoreField& score, const ParticleEnsemble& init,
                            const LmcConfig& cfg, const StreamKey& key) {
  return sample_impl(score, init, cfg, key);
}

ParticleEnsemble lmc_sample(const Mlp& score, const ParticleEnsemble& init, const LmcConfig& cfg,
                            const StreamKey& key) {
  require(score.in_dim() == score.out_dim(), "lmc: score network must be square");
  require(init.dim() == score.in_dim(), "lmc: particle dimension mismatch");
  auto field = [&score](std::span<const double> x, std::span<double> out) {
    score.forward(x, out);
  };
  return sample_impl(field, init, cfg, key);
}

std::vector<ParticleEnsemble> measures_for_iteration(const std::vector<Mlp>& scores,
                                                     const LmcConfig& cfg,
                                                     const std::vector<ParticleEnsemble>* warm,
                                                     std::size_t chains, std::uint64_t seed,
                                                     std::uint64_t iteration) {
  cfg.validate();
  require(!scores.empty(), "lmc: no score networks");
  require(chains > 0, "lmc: need at least one chain");
  const std::size_t steps = scores.size();
  const std::size_t d = scores[0].in_dim();
  if (warm) {
    require(warm->size() == steps, "lmc: warm start has the wrong number of steps");
    for (const auto& w : *warm)
      require(w.size() == chains && w.dim() == d, "lmc: warm start shape mismatch");
  }
  std::vector<ParticleEnsemble> out(steps, ParticleEnsemble(chains, d));
  const StreamKey init_key{seed, Stream::kLmcInit, iteration};
  const StreamKey run_key{seed, Stream::kLmc, iteration};
  tbb::parallel_for(
      tbb::blocked_range<std::size_t>(0, steps * chains),
      [&](const tbb::blocked_range<std::size_t>& r) {
        for (std::size_t idx = r.begin(); idx < r.end(); ++idx) {
          const std::size_t t = idx / chains, m = idx % chains;
          auto x = out[t][m];
          if (warm) {
            const auto w = (*warm)[t][m];
            std::copy(w.begin(), w.end(), x.begin());
          } else {
            auto rng = make_stream(init_key.with(iteration, t, m));
            std::normal_distribution<double> normal;
            for (double& v : x) v = normal(rng);
          }
          const Mlp& net = scores[t];
          auto field = [&net](std::span<const double> p, std::span<double> s) {
            net.forward(p, s);
          };
          auto rng = make_stream(run_key.with(iteration, t, m));
          run_chain(field, x, cfg, rng, m);
        }
      });
  return out;
}

}  // namespace mfac
