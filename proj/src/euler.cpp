#include "hypocoax/euler.hpp"

namespace hypocoax {

double EulerPressure::enthalpy(double rho) const {
  if (rho <= 0.0) throw Error(ErrorCode::InvalidInput, "density must be positive");
  if (gamma == 1.0) return std::log(rho);
  return (std::pow(rho, gamma - 1.0) - 1.0) / (gamma - 1.0);
}

double EulerPressure::density(double n) const {
  if (gamma == 1.0) return std::exp(n);
  const double base = 1.0 + (gamma - 1.0) * n;
  if (base <= 0.0) throw Error(ErrorCode::CoefficientSingular, "enthalpy below vacuum");
  return std::pow(base, 1.0 / (gamma - 1.0));
}

SystemSpec make_euler_system(int d, double gamma, double lambda) {
  if (d < 1 || d > 3) throw Error(ErrorCode::InvalidInput, "Euler system supports d = 1, 2, 3");
  if (!(gamma >= 1.0)) throw Error(ErrorCode::InvalidGamma, "gamma must be >= 1");
  if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidInput, "damping must be positive");
  const EulerPressure law{gamma};
  const int n = d + 1;

  SystemSpec s;
  s.name = "euler-damped-" + std::to_string(d) + "d";
  s.d = d;
  s.n = n;
  s.n1 = 1;
  s.equilibrium = Vector::Zero(n);
  s.neighborhood_radius = 0.1;

  s.coeff = [=](int j, const Vector& V) -> Matrix {
    if (j == 0) return Matrix::Identity(n, n);
    Matrix a = V(j) * Matrix::Identity(n, n);
    a(0, j) = 1.0 + law.G(V(0));
    a(j, 0) = 1.0;
    return a;
  };
  s.source = [=](const Vector& V) -> Vector {
    Vector h = Vector::Zero(n);
    h.tail(d) = -lambda * V.tail(d);
    return h;
  };
  s.symmetrizer = [=](const Vector& V) -> Matrix {
    const double p = 1.0 + law.G(V(0));
    if (p <= 0.0) throw Error(ErrorCode::CoefficientSingular, "1 + G(n) must stay positive");
    Matrix m = Matrix::Identity(n, n);
    m(0, 0) = 1.0 / p;
    return m;
  };
  s.weighted_source_jacobian = [=](const Vector&) -> Matrix {
    Matrix m = Matrix::Zero(n, n);
    m.bottomRightCorner(d, d) = -lambda * Matrix::Identity(d, d);
    return m;
  };
  s.field_rhs = [=](const Matrix& V, const std::vector<Matrix>& grad, Matrix& rate) {
    rate.resize(V.rows(), n);
    const auto nn = V.col(0).array();
    Eigen::ArrayXd div = Eigen::ArrayXd::Zero(V.rows());
    Eigen::ArrayXd adv_n = Eigen::ArrayXd::Zero(V.rows());
    for (int j = 0; j < d; ++j) {
      div += grad[j].col(1 + j).array();
      adv_n += V.col(1 + j).array() * grad[j].col(0).array();
    }
    rate.col(0) = -(adv_n + (1.0 + (gamma - 1.0) * nn) * div).matrix();
    for (int i = 0; i < d; ++i) {
      Eigen::ArrayXd r = grad[i].col(0).array() + lambda * V.col(1 + i).array();
      for (int j = 0; j < d; ++j) r += V.col(1 + j).array() * grad[j].col(1 + i).array();
      rate.col(1 + i) = -r.matrix();
    }
  };
  return s;
}

}  // namespace hypocoax
