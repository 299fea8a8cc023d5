// Fit a smeared CAP ensemble to noisy samples of a bowl and minimize it
// over the square [-1,1]^2.

#include <iostream>

#include "cvxreg/cvxreg.hpp"

int main() {
  using namespace cvxreg;

  const Dataset data = gen::gen_opt(100, 7);

  FitConfig fit;
  fit.seed = 7;
  EnsembleConfig ens;
  ens.members = 50;
  ens.seed = 7;
  const EnsembleModel model = smear_fixed(data, BaseMethod::cap, fit, ens);

  const SolveResult sol = minimize(model, gen::opt_box());
  std::cout << "status:         " << to_string(sol.status) << '\n'
            << "x_hat:          (" << sol.x_star[0] << ", " << sol.x_star[1] << ")\n"
            << "surrogate min:  " << sol.value << '\n'
            << "true f(x_hat):  " << gen::f_opt(sol.x_star) << '\n';
  return sol.status == SolveStatus::optimal ? 0 : 1;
}
