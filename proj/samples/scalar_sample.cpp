// Fits w in the toy system x = 0.5 x + w to the objective x^2 / 2 with the
// certified schedule, then prints the last few trace rows.
#include "pam/pam.hpp"

#include <iostream>

int main() {
  const auto p = pam::models::make_scalar_problem(0.5, 2.0);
  const auto k = pam::certified_constants(*p.system.lipschitz, 0.4, 0.5, 0.5);

  pam::RunConfig rc;
  rc.mode = k;
  rc.max_outer_iterations = 2000;
  rc.w0 = pam::Vector::Constant(1, 1.0);
  rc.z0 = {pam::Vector::Constant(1, 2.0), pam::Vector::Constant(1, 4.0)};

  const auto r = pam::run(p.system, p.loss, rc);
  std::cout << "status: " << pam::to_string(r.status) << "\n"
            << "eps = " << k.epsilon << ", delta = " << k.delta << ", c = " << k.c << "\n"
            << "w: 1 -> " << r.w[0] << ", objective " << p.objective(1.0) << " -> "
            << p.objective(r.w[0]) << "\n"
            << "total inner steps: " << r.trace.total_inner_steps() << "\n";
}
