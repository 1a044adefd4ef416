#pragma once

#include "hypocoax/system_model.hpp"

namespace hypocoax {

/// Pressure-law data of the damped isentropic Euler system in the (n, u)
/// variables, with P(rho) = rho^gamma / gamma so that P'(1) = 1.
struct EulerPressure {
  double gamma = 2.0;

  /// n(rho) = int_1^rho P'(s)/s ds.
  double enthalpy(double rho) const;
  /// Inverse of enthalpy().
  double density(double n) const;
  double pressure_derivative(double rho) const { return std::pow(rho, gamma - 1.0); }
  /// G(n) = (gamma - 1) n, i.e. G(n(rho)) = P'(rho) - 1.
  double G(double n) const { return (gamma - 1.0) * n; }
};

/// Damped Euler  dn/dt + u.grad n + (1 + G(n)) div u = 0,
///               du/dt + u.grad u + grad n + lambda u = 0,
/// state V = (n, u_1..u_d), symmetrizer diag(1/(1+G(n)), I_d).
SystemSpec make_euler_system(int d, double gamma = 2.0, double lambda = 1.0);

}  // namespace hypocoax
