#include <catch2/catch_amalgamated.hpp>

#include "splitfilter/optim.hpp"

#include <cmath>

using namespace splitfilter;

TEST_CASE("zero gradients leave parameters unchanged") {
  auto state = AdamState::create(3);
  Eigen::VectorXd params(3);
  params << 1.0, -2.0, 0.5;
  const Eigen::VectorXd before = params;
  adam_step(state, params, Eigen::VectorXd::Zero(3), 0.01);
  REQUIRE(params == before);
}

TEST_CASE("first step follows the bias-corrected update") {
  // t = 1: m_hat = g, v_hat = g^2, so the step is -lr * g / (|g| + eps).
  auto state = AdamState::create(1);
  Eigen::VectorXd params(1);
  params << 0.3;
  Eigen::VectorXd grads(1);
  grads << 1.0;
  adam_step(state, params, grads, 0.01);
  const double expected = 0.3 - 0.01 * 1.0 / (1.0 + 1e-8);
  REQUIRE(params(0) == Catch::Approx(expected).margin(1e-15));
  REQUIRE(std::abs(params(0) - 0.29) < 1e-9);
}

TEST_CASE("identical runs produce bit-identical trajectories") {
  auto run = [] {
    auto state = AdamState::create(2);
    Eigen::VectorXd params(2);
    params << 1.0, -1.0;
    for (int i = 0; i < 50; ++i) {
      Eigen::VectorXd grads = 2.0 * params;  // f = |x|^2
      adam_step(state, params, grads, 0.05);
    }
    return params;
  };
  REQUIRE(run() == run());
}

TEST_CASE("adam minimizes x^2 from x = 1") {
  auto state = AdamState::create(1);
  Eigen::VectorXd params(1);
  params << 1.0;
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd grads(1);
    grads << 2.0 * params(0);
    adam_step(state, params, grads, 0.1);
  }
  REQUIRE(std::abs(params(0)) < 1e-2);
}

TEST_CASE("non-finite gradients raise an error naming the block") {
  NetworkArchitecture arch;
  arch.hidden_widths = {4};
  auto stream = rng::substream(3, rng::Purpose::network_init);
  NetworkParams p = initialize_network(arch, stream);
  auto state = AdamState::create(p.values.size());
  Eigen::VectorXd grads = Eigen::VectorXd::Zero(p.values.size());
  const auto& block = p.layout.find("dense1.weight");
  grads(block.offset + 1) = std::nan("");
  try {
    adam_step(state, p.values, grads, 0.01, &p.layout);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    REQUIRE(std::string(e.what()).find("dense1.weight") != std::string::npos);
  }
}

TEST_CASE("learning-rate schedule is a half-open piecewise lookup") {
  LrSchedule s{{0, 2000, 4000}, {1e-2, 1e-3, 1e-4}};
  s.validate();
  REQUIRE(lr_at(s, 1) == 1e-2);
  REQUIRE(lr_at(s, 1999) == 1e-2);
  REQUIRE(lr_at(s, 2000) == 1e-3);  // cutoff belongs to the higher index
  REQUIRE(lr_at(s, 3999) == 1e-3);
  REQUIRE(lr_at(s, 4000) == 1e-4);
  REQUIRE(lr_at(s, 6001) == 1e-4);
}

TEST_CASE("single-rate schedule is constant and covers all epochs") {
  LrSchedule s{{0}, {5e-3}};
  s.validate();
  for (long n : {1L, 10L, 100000L}) REQUIRE(lr_at(s, n) == 5e-3);
}

TEST_CASE("schedule validation rejects malformed tables") {
  REQUIRE_THROWS_AS((LrSchedule{{0, 10}, {1e-2}}.validate()), ConfigError);
  REQUIRE_THROWS_AS((LrSchedule{{1, 10}, {1e-2, 1e-3}}.validate()), ConfigError);
  REQUIRE_THROWS_AS((LrSchedule{{0, 10, 10}, {1e-2, 1e-3, 1e-4}}.validate()), ConfigError);
  REQUIRE_THROWS_AS((LrSchedule{{0}, {-1.0}}.validate()), ConfigError);
}
