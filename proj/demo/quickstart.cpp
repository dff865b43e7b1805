// Simulate a cluster-masked Durbin panel, fit it, and decompose the effects.

#include <iostream>

#include "sdmc/sdmc.hpp"

int main() {
  sdmc::DgpConfig cfg;
  cfg.n = 40;
  cfg.t = 8;
  cfg.rho = 0.35;
  cfg.gamma.resize(2, 2);
  cfg.gamma << -0.4, 0.2, 0.3, -0.1;
  cfg.seed = 7;

  const auto data = sdmc::generate(cfg);
  const auto fit = sdmc::fit(data.panel, data.weights, data.spec);
  std::cout << sdmc::render_fit_table(fit) << '\n';

  sdmc::EffectsOptions opt;
  opt.draws = 500;
  opt.seed = 11;
  std::cout << sdmc::render_effects_table(sdmc::effects_dispersion(fit, opt)) << '\n';

  const auto hausman = sdmc::hausman_test(data.panel);
  std::cout << sdmc::hausman_verdict(hausman, 0.05) << '\n';
}
