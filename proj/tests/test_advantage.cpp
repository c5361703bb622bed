#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "dapolab/advantage.hpp"
#include "dapolab/rng.hpp"

using namespace dapolab;

namespace {

double mean_of(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  return m / static_cast<double>(v.size());
}

double pop_std_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double var = 0.0;
  for (double x : v) var += (x - m) * (x - m);
  return std::sqrt(var / static_cast<double>(v.size()));
}

// Direct double-sum evaluation: A_t = sum_l (gamma*lambda)^l delta_{t+l},
// truncated at the episode end. Independent of the backward recursion.
std::vector<double> gae_double_sum(const GaeInput& in) {
  const std::size_t t_max = in.rewards.size();
  std::vector<double> delta(t_max);
  for (std::size_t l = 0; l < t_max; ++l) {
    delta[l] = in.rewards[l] + in.gamma * in.values[l + 1] - in.values[l];
  }
  std::vector<double> adv(t_max, 0.0);
  for (std::size_t t = 0; t < t_max; ++t) {
    double factor = 1.0;
    for (std::size_t l = 0; t + l < t_max; ++l) {
      adv[t] += factor * delta[t + l];
      factor *= in.gamma * in.lambda;
    }
  }
  return adv;
}

}  // namespace

TEST_CASE("two-point symmetric rewards normalize to +1/-1") {
  const auto adv = group_advantages(std::vector<double>{1.0, -1.0});
  CHECK(adv[0] == 1.0);
  CHECK(adv[1] == -1.0);
}

TEST_CASE("all-equal rewards give exactly zero advantages") {
  for (double r : {1.0, -1.0, 0.25}) {
    const auto adv = group_advantages(std::vector<double>(8, r));
    for (double a : adv) CHECK(a == 0.0);
  }
}

TEST_CASE("tiny spread falls back to zero advantages") {
  std::vector<double> rewards(4, 1.0);
  rewards[0] = 1.0 + 1e-12;
  const auto adv = group_advantages(rewards, 1e-8);
  for (double a : adv) CHECK(a == 0.0);
}

TEST_CASE("normalized advantages have zero mean and unit deviation") {
  RandomStream rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t g = 2 + rng.below(14);
    std::vector<double> rewards(g);
    for (double& r : rewards) r = rng.uniform(-2.0, 2.0);
    if (pop_std_of(rewards) < 1e-6) continue;
    const auto adv = group_advantages(rewards);
    CHECK(std::abs(mean_of(adv)) <= 1e-12);
    CHECK(std::abs(pop_std_of(adv) - 1.0) <= 1e-9);
  }
}

TEST_CASE("advantages are shift invariant and flip under negation") {
  RandomStream rng(29);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> rewards(6);
    for (double& r : rewards) r = rng.uniform(-1.0, 1.0);
    if (pop_std_of(rewards) < 1e-6) continue;

    const auto base = group_advantages(rewards);
    std::vector<double> shifted = rewards;
    for (double& r : shifted) r += 0.75;
    const auto shifted_adv = group_advantages(shifted);
    std::vector<double> negated = rewards;
    for (double& r : negated) r = -r;
    const auto negated_adv = group_advantages(negated);

    for (std::size_t i = 0; i < rewards.size(); ++i) {
      CHECK(shifted_adv[i] == doctest::Approx(base[i]).epsilon(1e-9));
      CHECK(negated_adv[i] == doctest::Approx(-base[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("binary rewards produce exactly two advantage values") {
  const int g = 8;
  for (int c = 1; c < g; ++c) {
    std::vector<double> rewards(g, -1.0);
    for (int i = 0; i < c; ++i) rewards[i] = 1.0;
    const auto adv = group_advantages(rewards);

    const double mean = static_cast<double>(2 * c - g) / g;
    const double sigma = std::sqrt(1.0 - mean * mean);
    std::set<double> distinct(adv.begin(), adv.end());
    CHECK(distinct.size() == 2);
    CHECK(adv[0] == doctest::Approx((1.0 - mean) / sigma).epsilon(1e-12));
    CHECK(adv[g - 1] == doctest::Approx((-1.0 - mean) / sigma).epsilon(1e-12));
    CHECK(adv[0] > 0.0);
    CHECK(adv[g - 1] < 0.0);
  }
}

TEST_CASE("groups need at least two rewards") {
  CHECK_THROWS(group_advantages(std::vector<double>{1.0}));
  CHECK_THROWS(group_advantages(std::vector<double>{}));
}

TEST_CASE("gae with lambda zero is the one-step TD error") {
  GaeInput in;
  in.rewards = {1.0, -0.5, 2.0, 0.25};
  in.values = {0.3, -0.1, 0.7, 0.2, 0.0};
  in.gamma = 0.9;
  in.lambda = 0.0;
  const auto adv = gae(in);
  for (std::size_t t = 0; t < in.rewards.size(); ++t) {
    const double delta = in.rewards[t] + in.gamma * in.values[t + 1] - in.values[t];
    CHECK(adv[t] == delta);  // exact
  }
}

TEST_CASE("gae with gamma=lambda=1 and zero values is reward-to-go") {
  GaeInput in;
  in.rewards = {1.0, 2.0, 3.0, -4.0, 0.5};
  in.values.assign(in.rewards.size() + 1, 0.0);
  in.gamma = 1.0;
  in.lambda = 1.0;
  const auto adv = gae(in);

  double suffix = 0.0;
  for (std::size_t t = in.rewards.size(); t-- > 0;) {
    suffix += in.rewards[t];
    CHECK(adv[t] == suffix);  // exact: same backward summation order
  }
}

TEST_CASE("gae backward recursion matches the double-sum oracle") {
  RandomStream rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    GaeInput in;
    const std::size_t t_max = 1 + rng.below(10);
    in.rewards.resize(t_max);
    in.values.resize(t_max + 1);
    for (double& r : in.rewards) r = rng.uniform(-2.0, 2.0);
    for (double& v : in.values) v = rng.uniform(-1.0, 1.0);
    in.gamma = rng.uniform01();
    in.lambda = rng.uniform01();

    const auto fast = gae(in);
    const auto slow = gae_double_sum(in);
    for (std::size_t t = 0; t < t_max; ++t) {
      CHECK(fast[t] == doctest::Approx(slow[t]).epsilon(1e-12));
    }
  }
}

TEST_CASE("a fixed six-step instance agrees with the oracle") {
  GaeInput in;
  in.rewards = {0.5, -1.0, 0.25, 2.0, -0.75, 1.5};
  in.values = {0.2, 0.1, -0.3, 0.4, 0.0, -0.2, 0.05};
  in.gamma = 0.97;
  in.lambda = 0.8;
  const auto fast = gae(in);
  const auto slow = gae_double_sum(in);
  for (std::size_t t = 0; t < in.rewards.size(); ++t) {
    CHECK(fast[t] == doctest::Approx(slow[t]).epsilon(1e-12));
  }
}

TEST_CASE("gae validates its input") {
  GaeInput in;
  in.rewards = {1.0, 2.0};
  in.values = {0.0, 0.0};  // must be one longer than rewards
  CHECK_THROWS(gae(in));
  in.values = {0.0, 0.0, 0.0};
  in.gamma = 1.5;
  CHECK_THROWS(gae(in));
  in.gamma = 0.9;
  in.lambda = -0.1;
  CHECK_THROWS(gae(in));
}
