// Fit ECM to a synthetic dataset and compare its effect estimates with the
// generator's ground truth.

#include "ecm/datagen.hpp"
#include "ecm/ecm.hpp"
#include "ecm/metrics.hpp"

#include <cstdio>
#include <vector>

int main() {
  const ecm::SyntheticConfig cfg = ecm::SyntheticConfig::corners(1.5, 1.0, 2000, 7);
  const ecm::Dataset data = ecm::generate(cfg);

  const ecm::FitResult result = ecm::fit(data);
  const ecm::MixturePosterior posterior(result.model);

  std::vector<double> tau_hat(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) tau_hat[i] = posterior.ite(data.x(i));

  std::printf("iterations %zu, converged %d, elbo %.4f\n", result.model.meta.iters,
              result.model.meta.converged ? 1 : 0, result.model.meta.elbo);
  for (std::size_t k = 0; k < ecm::kNumGroups; ++k) {
    const auto& c = result.model.components[k];
    std::printf("%c  pi %.3f  mu (%.3f, %.3f)\n", ecm::group_code(ecm::group_at(k)),
                result.model.pi[static_cast<Eigen::Index>(k)], c.mu[0], c.mu[1]);
  }
  std::printf("PEHE %.4f\n", ecm::metrics::pehe(data.oracle()->tau, tau_hat));
  std::printf("AUUC %.3f\n", ecm::metrics::auuc(tau_hat, data.treatment(), data.outcome()));
}
