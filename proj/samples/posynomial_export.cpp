// Fit gate power data in log space and export the fit as a
// max-of-monomials for use in a geometric program.

#include <cmath>
#include <iostream>

#include "cvxreg/cvxreg.hpp"

int main() {
  using namespace cvxreg;

  const Dataset raw = gen::gen_power(400, 3);
  FitConfig fit;
  fit.seed = 3;
  const MaxAffineModel log_model = fit_mb(log_transform(raw), fit);
  const PosynomialModel pm = export_posynomial(log_model);

  std::cout << gp_constraint_listing(pm);

  const std::vector<double> v = {1.5, 0.3};
  std::cout << "P(1.5, 0.3) true " << gen::f_power(v) << ", model " << pm(v) << '\n';
  return 0;
}
