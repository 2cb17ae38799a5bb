#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "ftnn/perturb.hpp"
#include "problems.hpp"

using namespace ftnn;

TEST_CASE("perturb_input trivial cases") {
  const std::vector<double> x{0.3, -1.2, 0.0};
  CHECK(perturb_input(x, {PerturbMode::Vanishing, 0.0, 0.7, 1, 1}) == x);
  CHECK(perturb_input(x, {PerturbMode::Amplitude, 0.0, 0.7, 1, 1}) == x);
  const auto y = perturb_input(x, {PerturbMode::Vanishing, 0.4, 0.7, 1, 1});
  CHECK(y[2] == 0.0);
  CHECK(y != x);
}

TEST_CASE("admissibility and seed determinism") {
  const std::vector<double> x{0.9, -0.05, 3.0};
  for (auto mode : {PerturbMode::Vanishing, PerturbMode::Amplitude}) {
    const PerturbationSpec spec{mode, 0.3, 0.7, 17, 1};
    PerturbationStream a(spec), b(spec);
    for (int n = 0; n < 2000; ++n) {
      const auto xa = a.next(x), xb = b.next(x);
      CHECK(xa == xb);
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double bound = mode == PerturbMode::Vanishing ? 0.3 * std::pow(std::abs(x[i]), 0.7) : 0.3;
        CHECK(std::abs(xa[i] - x[i]) <= bound * (1.0 + 1e-12));
      }
    }
    CHECK(a.violations() == 0);
    CHECK(a.max_ratio() <= 1.0);
  }
}

TEST_CASE("hold_steps keeps a draw across steps") {
  const std::vector<double> x{0.5, 0.5};
  PerturbationStream s({PerturbMode::Amplitude, 0.2, 0.7, 3, 4});
  const auto a = s.observe(x, 0), b = s.observe(x, 3), c = s.observe(x, 4);
  CHECK(a == b);
  CHECK(a != c);
  CHECK_THROWS_AS(PerturbationStream({PerturbMode::Amplitude, 0.2, 0.7, 3, 0}), ContractError);
  CHECK_THROWS_AS(PerturbationStream({PerturbMode::Amplitude, -0.2, 0.7, 3, 1}), ContractError);
}

namespace {
Integrator grid() {
  problems::PerturbedNeuron p;
  Integrator in;
  in.dt = 2e-5;
  in.t_max = 1.0;
  return in;
}
}  // namespace

TEST_CASE("M = 0 reproduces the unperturbed run") {
  problems::PerturbedNeuron p;
  const auto loss = LyapunovLoss::single_neuron(0.7);
  const auto gamma = estimate_gamma({p.sample.x});
  const auto rr = robustness_run(p.net, TheoryFlow{p.sample}, {PerturbMode::Vanishing, 0.0, 0.7, 5, 1}, loss,
                                 GainSchedule::scalar(1.0), grid(), StoppingRule{1e-9}, gamma);
  const auto plain = integrate(p.net, TheoryFlow{p.sample}, loss, GainSchedule::scalar(1.0), grid(), StoppingRule{1e-9});
  std::ostringstream a, b;
  write_trajectory_csv(a, rr.trajectory);
  write_trajectory_csv(b, plain);
  CHECK(a.str() == b.str());
  CHECK(rr.guaranteed);
}

TEST_CASE("guaranteed run settles within the perturbed bound and obeys the inequality") {
  problems::PerturbedNeuron p;
  const auto loss = LyapunovLoss::single_neuron(0.7);
  const auto gamma = estimate_gamma({p.sample.x});
  for (double M : {0.1, 0.5, 0.9}) {
    const auto rr = robustness_run(p.net, TheoryFlow{p.sample}, {PerturbMode::Vanishing, M, 0.7, 11, 1}, loss,
                                   GainSchedule::scalar(1.0), grid(), StoppingRule{1e-9}, gamma);
    REQUIRE(rr.bound);
    CHECK(rr.guaranteed);
    const auto settle = detect_settle(rr.trajectory, StoppingRule{1e-9});
    REQUIRE(settle);
    CHECK(*settle <= rr.bound->T);
    CHECK(verify_decrease(rr.trajectory, *rr.bound).ok());
    CHECK(rr.admissibility_violations == 0);
  }
}

TEST_CASE("unguaranteed and empirical-only runs still execute") {
  problems::PerturbedNeuron p;
  const auto loss = LyapunovLoss::single_neuron(0.7);
  const auto gamma = estimate_gamma({p.sample.x});
  const auto refused = robustness_run(p.net, TheoryFlow{p.sample}, {PerturbMode::Vanishing, 1.0, 0.7, 1, 1}, loss,
                                      GainSchedule::scalar(1.0), grid(), StoppingRule{1e-9}, gamma);
  CHECK(!refused.bound);
  CHECK(!refused.guaranteed);
  CHECK(refused.note == "unguaranteed: k_min <= M");
  CHECK(!refused.trajectory.records.empty());
  const auto amp = robustness_run(p.net, TheoryFlow{p.sample}, {PerturbMode::Amplitude, 0.1, 0.7, 1, 1}, loss,
                                  GainSchedule::scalar(1.0), grid(), StoppingRule{1e-9}, gamma);
  CHECK(!amp.guaranteed);
  CHECK(amp.note == "amplitude-bounded noise: empirical only");
}
