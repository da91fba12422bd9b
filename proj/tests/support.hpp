#pragma once

// Shared fixtures for the test suites: small elliptic setups that keep the
// dense oracles affordable.

#include <memory>
#include <vector>

#include "mldili/elliptic.hpp"
#include "mldili/hierarchy.hpp"
#include "mldili/prior_kl.hpp"

namespace mldili::testing {

struct SmallProblem {
  std::shared_ptr<const LevelHierarchy> hierarchy;
  std::shared_ptr<const KlExpansion> kl;
  std::shared_ptr<const ObservationSetup> obs;
  Eigen::VectorXd truth;
  std::unique_ptr<EllipticModel> model;
};

inline SmallProblem make_small_problem(double h0, std::vector<int> dims,
                                       double snr = 50.0,
                                       std::uint64_t truth_seed = 101,
                                       std::uint64_t noise_seed = 202,
                                       EllipticOptions options = {}) {
  SmallProblem p;
  p.hierarchy = std::make_shared<const LevelHierarchy>(
      LevelHierarchy::regular(h0, std::move(dims)));
  p.kl = std::make_shared<const KlExpansion>(*p.hierarchy, KernelSpec{5.0, 1.0},
                                             p.hierarchy->finest());
  auto gen = generate_data(*p.hierarchy, *p.kl, default_sensor_layout(),
                           p.hierarchy->finest(), snr, truth_seed, noise_seed);
  p.truth = gen.truth;
  p.obs = std::make_shared<const ObservationSetup>(std::move(gen.setup));
  p.model = std::make_unique<EllipticModel>(p.hierarchy, p.kl, p.obs, options);
  return p;
}

}  // namespace mldili::testing
