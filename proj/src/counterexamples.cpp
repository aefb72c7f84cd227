// Copyright 2025 The BudgetGuard Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "counterexamples.hpp"

#include <cmath>
#include <vector>

#include "errors.hpp"

namespace budgetguard {

namespace {

constexpr double kFpGuard = 1e-9;
constexpr double kMinEffectiveSamples = 100.0;

// Pr[Lap(1/eps) >= z].
double laplace_tail(double z, double eps) {
  if (z >= 0.0) return 0.5 * std::exp(-eps * z);
  return 1.0 - 0.5 * std::exp(eps * z);
}

struct WeightAccumulator {
  double sum = 0.0;
  double sum_sq = 0.0;
  int64_t count = 0;

  void add(double w) {
    sum += w;
    sum_sq += w * w;
    ++count;
  }
  double mean() const { return sum / static_cast<double>(count); }
  double variance() const {
    double m = mean();
    return sum_sq / static_cast<double>(count) - m * m;
  }
  // Effective sample size of the weighted tail estimate; plays the role of
  // the raw tail count for the insufficient-mass check.
  double effective_samples() const {
    return sum_sq > 0.0 ? sum * sum / sum_sq : 0.0;
  }
  // Standard error of ln(mean).
  double log_stderr() const {
    double m = mean();
    return std::sqrt(std::max(variance(), 0.0) / static_cast<double>(count)) / m;
  }
};

void validate_common(const CxParams& params, bool thm2) {
  if (!(params.eps > 0.0)) throw InvalidParams("eps must be positive");
  if (params.n < 0) throw InvalidParams("n must be non-negative");
  if (params.trials < 10000) throw InvalidParams("at least 10^4 trials are required");
  if (thm2) {
    double min_n = 4.0 * std::log(2.0) /
                   ((1.0 - std::exp(-params.eps / 2.0)) *
                    (1.0 - std::exp(-params.eps / 2.0)));
    if (params.n < static_cast<int>(std::ceil(min_n))) {
      throw InvalidParams("n below the shared-limit construction threshold");
    }
  }
}

double eps_prime_of(double p, double eps) {
  return std::log((p + (1.0 - p) * std::exp(eps)) /
                  (p * std::exp(eps) + 1.0 - p));
}

double binom_pmf(int n, double p, int k) {
  if (p <= 0.0) return k == 0 ? 1.0 : 0.0;
  if (p >= 1.0) return k == n ? 1.0 : 0.0;
  double logc =
      std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
  return std::exp(logc + k * std::log(p) + (n - k) * std::log1p(-p));
}

// Pr[Binomial(n, p) > t], exact.
double binom_tail_gt(int n, double p, double t) {
  double total = 0.0;
  for (int k = 0; k <= n; ++k) {
    if (static_cast<double>(k) > t + kFpGuard) total += binom_pmf(n, p, k);
  }
  return total;
}

}  // namespace

Thm1ClosedForm thm1_closed_form(double eps, int n) {
  if (!(eps > 0.0)) throw InvalidParams("eps must be positive");
  if (n < 0) throw InvalidParams("n must be non-negative");
  Thm1ClosedForm cf;
  cf.p = 0.5 * std::exp(-eps / 2.0);
  cf.eps_prime = eps_prime_of(cf.p, eps);
  cf.log_ratio = eps + static_cast<double>(n) * cf.eps_prime;
  return cf;
}

CxResult thm1_simulate(const CxParams& params, Rng& rng) {
  validate_common(params, /*thm2=*/false);
  const double eps = params.eps;
  const int n = params.n;
  const double threshold =
      params.tail_threshold > 0 ? static_cast<double>(params.tail_threshold)
                                : static_cast<double>(n + 1);

  // Per world: helpers observe D1 = b through Laplace counts, each spending
  // its full budget eps. The generated second-epoch data is the number of
  // observations above 1/2; the final querier reads D1 + D2 + Lap(1/eps).
  // Conditioning on the sampled binomial path, the tail probability of the
  // final Laplace draw is integrated exactly per trial.
  WeightAccumulator acc[2];
  for (int b = 0; b <= 1; ++b) {
    for (int64_t t = 0; t < params.trials; ++t) {
      int inserted = 0;
      for (int k = 0; k < n; ++k) {
        if (static_cast<double>(b) + rng.laplace(1.0 / eps) > 0.5) ++inserted;
      }
      double shift = threshold - static_cast<double>(b) - static_cast<double>(inserted);
      acc[b].add(laplace_tail(shift, eps));
    }
  }

  for (int b = 0; b <= 1; ++b) {
    if (acc[b].effective_samples() < kMinEffectiveSamples) {
      throw InsufficientTailMass("tail estimate for world " + std::to_string(b) +
                                 " needs more trials");
    }
  }

  CxResult result;
  result.trials = params.trials;
  result.estimate = std::log(acc[1].mean() / acc[0].mean());
  result.stderr_est = std::sqrt(acc[0].log_stderr() * acc[0].log_stderr() +
                                acc[1].log_stderr() * acc[1].log_stderr());
  result.closed_form = thm1_closed_form(eps, n).log_ratio;
  result.lower_bound = eps;
  result.max_per_querier_spend = eps;
  return result;
}

namespace {

CxResult thm2_simulate_dp(const CxParams& params, Rng& rng) {
  const double eps = params.eps;
  const int n = params.n;
  const double eps0 = params.eps0 > 0.0 ? params.eps0 : eps / 2.0;
  if (eps0 >= eps) throw InvalidParams("eps0 must be below eps");
  const double eps2 = 2.0 * eps0 / static_cast<double>(n);
  const double eps_g = params.eps_global > 0.0
                           ? params.eps_global
                           : (n + 1) * eps - eps0;
  // Saturation split: helpers spend eps1 upfront so that a unanimous
  // follow-up round fills the shared filter exactly, capped by their own
  // budgets.
  const double eps1 =
      std::min((eps_g - eps - eps0) / static_cast<double>(n), eps - eps2);
  if (eps1 <= 0.0) throw InvalidParams("eps_global leaves no observation budget");

  // The final querier's view: V1 = b + Lap(1/(eps-eps0)) from its first
  // query, and bottom iff its eps0 request overflows the shared filter.
  // Event S = { V1 > 1 and V2 = bottom }; the V1 factor is exact.
  int64_t bottom_count[2] = {0, 0};
  double max_spend = 0.0;
  for (int b = 0; b <= 1; ++b) {
    for (int64_t t = 0; t < params.trials; ++t) {
      int followed_up = 0;
      for (int k = 0; k < n; ++k) {
        if (static_cast<double>(b) + rng.laplace(1.0 / eps1) > 0.5) ++followed_up;
      }
      double shared = static_cast<double>(n) * eps1 + (eps - eps0) +
                      static_cast<double>(followed_up) * eps2;
      if (shared + eps0 > eps_g + kFpGuard) ++bottom_count[b];
      max_spend = std::max(max_spend, followed_up > 0 ? eps1 + eps2 : eps1);
    }
  }

  // Degenerate case: the shared filter never binds in either world, so the
  // construction collapses to the final querier's own eps - eps0 view.
  const bool degenerate = bottom_count[0] == 0 && bottom_count[1] == 0;
  if (!degenerate && (bottom_count[0] < 100 || bottom_count[1] < 100)) {
    throw InsufficientTailMass("bottom event too rare; more trials needed");
  }

  auto smoothed = [&](int b) {
    return (static_cast<double>(bottom_count[b]) + 0.5) /
           (static_cast<double>(params.trials) + 1.0);
  };
  double q0 = smoothed(0);
  double q1 = smoothed(1);

  CxResult result;
  result.trials = params.trials;
  result.estimate = (eps - eps0) + std::log(q1 / q0);
  result.stderr_est =
      std::sqrt((1.0 - q0) / (q0 * static_cast<double>(params.trials)) +
                (1.0 - q1) / (q1 * static_cast<double>(params.trials)));
  // Exact closed form: bottom iff followed_up > T, where T comes from the
  // same overflow arithmetic the simulation uses. With exact saturation,
  // T = n/2. Helpers follow up when their observation exceeds 1/2.
  const double p1 = 0.5 * std::exp(-eps1 / 2.0);
  const double t_overflow = (eps_g - static_cast<double>(n) * eps1 - eps) / eps2;
  double tail0 = binom_tail_gt(n, p1, t_overflow);
  double tail1 = binom_tail_gt(n, 1.0 - p1, t_overflow);
  result.closed_form =
      degenerate ? eps - eps0 : (eps - eps0) + std::log(tail1 / tail0);
  const double p = 0.5 * std::exp(-eps / 2.0);
  result.lower_bound = eps + static_cast<double>(n) * (0.5 - p) * (0.5 - p);
  result.max_per_querier_spend = std::max(max_spend, eps);  // final querier spends eps
  return result;
}

CxResult thm2_simulate_idp(const CxParams& params, Rng& rng) {
  const double eps = params.eps;
  const int n = params.n;
  // Per-record shared capacity. The observation phase and the drop rule
  // compete for it: the final querier reads the challenge record at full
  // budget, the helpers share what remains, and one helper charge on a
  // worker record must be enough to block the final count's access to it.
  const double eps_g = params.eps_global > 0.0 ? params.eps_global : 1.99 * eps;
  const double threshold = params.tail_threshold > 0
                               ? static_cast<double>(params.tail_threshold)
                               : static_cast<double>(n);

  const bool challenge_visible = eps <= eps_g + kFpGuard;
  const double eps_obs =
      std::min(eps, std::max(0.0, (eps_g - eps) / static_cast<double>(n)));
  // A worker record x_k is dropped from the final count iff helper k charged
  // it (amount eps) and a further eps does not fit the shared capacity.
  const bool charge_blocks = 2.0 * eps > eps_g + kFpGuard;

  WeightAccumulator acc[2];
  double max_spend = 0.0;
  for (int b = 0; b <= 1; ++b) {
    for (int64_t t = 0; t < params.trials; ++t) {
      int kept = 0;
      for (int k = 0; k < n; ++k) {
        double view;
        if (challenge_visible && eps_obs > 0.0) {
          view = static_cast<double>(b) + rng.laplace(1.0 / eps_obs);
        } else {
          view = -1.0;  // no observation budget: always below the cutoff
        }
        bool charged = view <= 0.5;
        bool dropped = charged && charge_blocks;
        if (!dropped) ++kept;
        max_spend = std::max(max_spend, charged ? eps : eps_obs);
      }
      double shift = threshold - static_cast<double>(kept);
      acc[b].add(laplace_tail(shift, eps));
    }
  }

  for (int b = 0; b <= 1; ++b) {
    if (acc[b].effective_samples() < kMinEffectiveSamples) {
      throw InsufficientTailMass("count tail for world " + std::to_string(b) +
                                 " needs more trials");
    }
  }

  // Event S = { V1 > 1 and V2 >= N }; the V1 factor is the final querier's
  // own full-budget observation of the challenge record and is exact.
  const double v1_factor = challenge_visible ? eps : 0.0;

  CxResult result;
  result.trials = params.trials;
  result.estimate = v1_factor + std::log(acc[1].mean() / acc[0].mean());
  result.stderr_est = std::sqrt(acc[0].log_stderr() * acc[0].log_stderr() +
                                acc[1].log_stderr() * acc[1].log_stderr());
  // Exact closed form by direct expectation over the kept-count binomial.
  double p_keep0;  // keep probability for a worker record in world 0
  double p_keep1;
  if (!challenge_visible || eps_obs <= 0.0) {
    p_keep0 = p_keep1 = charge_blocks ? 0.0 : 1.0;
  } else if (!charge_blocks) {
    p_keep0 = p_keep1 = 1.0;
  } else {
    p_keep0 = 0.5 * std::exp(-eps_obs / 2.0);
    p_keep1 = 1.0 - p_keep0;
  }
  double expect0 = 0.0;
  double expect1 = 0.0;
  for (int k = 0; k <= n; ++k) {
    double tail = laplace_tail(threshold - static_cast<double>(k), eps);
    expect0 += binom_pmf(n, p_keep0, k) * tail;
    expect1 += binom_pmf(n, p_keep1, k) * tail;
  }
  result.closed_form = v1_factor + std::log(expect1 / expect0);
  result.lower_bound = eps;
  result.max_per_querier_spend = std::max(max_spend, eps);
  return result;
}

}  // namespace

CxResult thm2_simulate(const CxParams& params, Rng& rng) {
  validate_common(params, /*thm2=*/true);
  return params.variant == CxVariant::DP ? thm2_simulate_dp(params, rng)
                                         : thm2_simulate_idp(params, rng);
}

}  // namespace budgetguard
