#include "hypocoax/system_model.hpp"

#include <algorithm>
#include <boost/random/sobol.hpp>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "hypocoax/euler.hpp"

namespace hypocoax {

namespace {

using json = nlohmann::json;

Matrix matrix_from_json(const json& j, int n, const std::string& what) {
  Matrix m(n, n);
  if (!j.is_array()) throw Error(ErrorCode::InvalidInput, what + " must be an array");
  if (j.size() == static_cast<std::size_t>(n) && j[0].is_array()) {
    for (int r = 0; r < n; ++r) {
      if (j[r].size() != static_cast<std::size_t>(n))
        throw Error(ErrorCode::DimensionMismatch, what + ": row length differs from n");
      for (int c = 0; c < n; ++c) m(r, c) = j[r][c].get<double>();
    }
  } else if (j.size() == static_cast<std::size_t>(n * n)) {
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) m(r, c) = j[r * n + c].get<double>();
  } else {
    throw Error(ErrorCode::DimensionMismatch, what + " is not an n x n matrix");
  }
  return m;
}

Matrix block(const Matrix& m, int n1, int rb, int cb) {
  const int n = static_cast<int>(m.rows());
  const int r0 = rb == 0 ? 0 : n1, rs = rb == 0 ? n1 : n - n1;
  const int c0 = cb == 0 ? 0 : n1, cs = cb == 0 ? n1 : n - n1;
  return m.block(r0, c0, rs, cs);
}

StructureCheck make_check(std::string name, double value, double tolerance) {
  return {std::move(name), value, tolerance, value <= tolerance};
}

}  // namespace

void validate(const SystemSpec& s) {
  if (s.d < 1) throw Error(ErrorCode::InvalidInput, "spatial dimension must be >= 1");
  if (s.n < 1 || s.n1 < 0 || s.n1 >= s.n)
    throw Error(ErrorCode::InvalidInput, "need 0 <= n1 < n");
  if (!s.coeff || !s.source || !s.symmetrizer)
    throw Error(ErrorCode::InvalidInput, "system evaluators are missing");
  if (s.equilibrium.size() != s.n)
    throw Error(ErrorCode::DimensionMismatch, "equilibrium has the wrong length");
}

Matrix LinearizedSystem::M(const Eigen::Ref<const Vector>& omega) const {
  if (omega.size() != d) throw Error(ErrorCode::DimensionMismatch, "direction has wrong size");
  Matrix s = Matrix::Zero(n, n);
  for (int j = 1; j <= d; ++j) s += omega(j - 1) * Abar[j];
  return weight_inverse * s;
}

LinearizedSystem LinearizedSystem::from_matrices(std::vector<Matrix> abar, Matrix L, int n1) {
  if (abar.size() < 2) throw Error(ErrorCode::InvalidInput, "need at least A^0 and A^1");
  LinearizedSystem lin;
  lin.d = static_cast<int>(abar.size()) - 1;
  lin.n = static_cast<int>(abar[0].rows());
  lin.n1 = n1;
  if (n1 < 0 || n1 >= lin.n) throw Error(ErrorCode::InvalidInput, "need 0 <= n1 < n");
  for (const auto& a : abar)
    if (a.rows() != lin.n || a.cols() != lin.n)
      throw Error(ErrorCode::DimensionMismatch, "coefficient matrices must be n x n");
  if (L.rows() != lin.n || L.cols() != lin.n)
    throw Error(ErrorCode::DimensionMismatch, "L must be n x n");
  for (std::size_t j = 0; j < abar.size(); ++j) {
    const double scale = std::max(1.0, abar[j].norm());
    if (symmetry_defect(abar[j]) > 1e-10 * scale)
      throw Error(ErrorCode::NonSymmetric, "A^" + std::to_string(j) + " is not symmetric");
  }
  const Matrix a0 = 0.5 * (abar[0] + abar[0].transpose());
  Eigen::LLT<Matrix> llt(a0);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::SingularWeight, "A^0 at the equilibrium is not positive definite");
  if (n1 > 0 && L.topRows(n1).norm() > 1e-12 * std::max(1.0, L.norm()))
    throw Error(ErrorCode::InvalidInput, "first n1 rows of L must vanish");
  lin.weight_inverse = llt.solve(Matrix::Identity(lin.n, lin.n));
  lin.Abar = std::move(abar);
  lin.L = std::move(L);
  lin.N = lin.weight_inverse * lin.L;
  const auto diss = dissipativity_constant(lin.N);
  lin.kappa0 = diss.constant;
  lin.kappa0_vacuous = diss.vacuous;
  return lin;
}

Matrix central_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x) {
  const double h =
      std::cbrt(std::numeric_limits<double>::epsilon()) * std::max(1.0, x.lpNorm<Eigen::Infinity>());
  const Vector f0 = f(x);
  Matrix jac(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    jac.col(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return jac;
}

LinearizedSystem linearize(const SystemSpec& system, const LinearizeOptions& options) {
  validate(system);
  const Vector& vbar = system.equilibrium;
  const double h_norm = system.source(vbar).norm();
  if (h_norm > options.equilibrium_tolerance)
    throw Error(ErrorCode::NotEquilibrium,
                "|H(V)| = " + std::to_string(h_norm) + " at the declared equilibrium");

  std::vector<Matrix> abar;
  for (int j = 0; j <= system.d; ++j) {
    Matrix a = system.weighted_coeff(j, vbar);
    const double scale = std::max(1.0, a.norm());
    if (symmetry_defect(a) > options.symmetry_tolerance * scale)
      throw Error(ErrorCode::NonSymmetric, "S A^" + std::to_string(j) + " is not symmetric");
    abar.push_back(0.5 * (a + a.transpose()));
  }
  Eigen::LLT<Matrix> llt(abar[0]);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::SingularWeight, "S A^0 at the equilibrium is not positive definite");

  Matrix dsh;
  if (system.weighted_source_jacobian) {
    dsh = system.weighted_source_jacobian(vbar);
  } else {
    dsh = central_jacobian([&](const Vector& v) { return system.weighted_source(v); }, vbar);
  }
  return LinearizedSystem::from_matrices(std::move(abar), -dsh, system.n1);
}

bool StructureReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

const StructureCheck& StructureReport::at(std::string_view name) const {
  for (const auto& c : checks)
    if (c.name == name) return c;
  throw Error(ErrorCode::InvalidInput, "no structure check named " + std::string(name));
}

std::vector<Vector> neighborhood_samples(const SystemSpec& system, int count, double radius) {
  if (radius < 0) radius = system.neighborhood_radius;
  const int n = system.n;
  boost::random::sobol gen(static_cast<std::size_t>(n));
  const double range = static_cast<double>(gen.max() - gen.min()) + 1.0;
  // The first Sobol point is the cube corner; skip it.
  for (int i = 0; i < n; ++i) gen();
  std::vector<Vector> samples;
  samples.reserve(static_cast<std::size_t>(count));
  for (int s = 0; s < count; ++s) {
    Vector p(n);
    for (int i = 0; i < n; ++i) p(i) = radius * (2.0 * static_cast<double>(gen() - gen.min()) / range - 1.0);
    const double r = p.norm();
    if (r > radius) p *= radius / r;
    samples.push_back(system.equilibrium + p);
  }
  return samples;
}

StructureReport check_symmetrizability(const SystemSpec& system,
                                       const std::vector<Vector>& samples, double tolerance) {
  validate(system);
  double worst_defect = 0.0;
  double worst_relative = 0.0;
  double min_eig = std::numeric_limits<double>::infinity();
  double weight_asym = 0.0;
  for (const auto& v : samples) {
    const Matrix s = system.symmetrizer(v);
    weight_asym = std::max(weight_asym, symmetry_defect(s) / std::max(1.0, s.norm()));
    min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (s + s.transpose()),
                                                                       Eigen::EigenvaluesOnly)
                                    .eigenvalues()
                                    .minCoeff());
    for (int j = 0; j <= system.d; ++j) {
      const Matrix a = s * system.coeff(j, v);
      const double defect = symmetry_defect(a);
      worst_defect = std::max(worst_defect, defect);
      worst_relative = std::max(worst_relative, defect / std::max(1.0, a.norm()));
    }
  }
  double min_a0 = std::numeric_limits<double>::infinity();
  for (const auto& v : samples) {
    const Matrix a0 = system.weighted_coeff(0, v);
    min_a0 = std::min(min_a0, Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (a0 + a0.transpose()),
                                                                     Eigen::EigenvaluesOnly)
                                  .eigenvalues()
                                  .minCoeff());
  }
  StructureReport report;
  StructureCheck sym{"symmetry_defect", worst_defect, tolerance, worst_relative <= tolerance};
  report.checks.push_back(sym);
  report.checks.push_back(make_check("symmetrizer_asymmetry", weight_asym, tolerance));
  report.checks.push_back({"symmetrizer_min_eigenvalue", min_eig, 0.0, min_eig > 0.0});
  report.checks.push_back({"min_weight_eigenvalue", min_a0, 0.0, min_a0 > 0.0});
  return report;
}

StructureReport check_block_structure(const SystemSpec& system,
                                      const std::vector<Vector>& samples, double tolerance) {
  validate(system);
  const int n = system.n, n1 = system.n1, d = system.d;
  const Vector& vbar = system.equilibrium;
  const LinearizedSystem lin = linearize(system);
  auto remainder = [&](const Vector& z) -> Vector {
    return system.weighted_source(vbar + z) + lin.L * z;
  };

  double offdiag = 0.0, source_cons = 0.0, r_cons = 0.0;
  for (const auto& v : samples) {
    const Matrix a0 = system.weighted_coeff(0, v);
    if (n1 > 0) {
      offdiag = std::max({offdiag, block(a0, n1, 0, 1).norm(), block(a0, n1, 1, 0).norm()});
      source_cons = std::max(source_cons, system.source(v).head(n1).norm());
    }
    Vector z = Vector::Zero(n);
    z.head(n1) = (v - vbar).head(n1);
    r_cons = std::max(r_cons, remainder(z).norm());
  }
  StructureReport report;
  report.checks.push_back(make_check("weight_offdiagonal_block", offdiag, tolerance));
  report.checks.push_back(make_check("source_conserved_block", source_cons, tolerance));
  report.checks.push_back(make_check("remainder_conserved_only", r_cons, tolerance));

  // Refined conditions: derivatives by central differences at the equilibrium.
  constexpr double derivative_tol = 1e-6;
  constexpr double hessian_tol = 1e-5;
  const double scale = std::max(1.0, vbar.lpNorm<Eigen::Infinity>());
  const double h1 = std::cbrt(std::numeric_limits<double>::epsilon()) * scale;
  double a11 = 0.0, da11 = 0.0, da21 = 0.0;
  for (int j = 1; j <= d; ++j) {
    const Matrix a = system.weighted_coeff(j, vbar);
    if (n1 > 0) a11 = std::max(a11, block(a, n1, 0, 0).norm());
    for (int i = 0; i < n1; ++i) {
      Vector vp = vbar, vm = vbar;
      vp(i) += h1;
      vm(i) -= h1;
      const Matrix da = (system.weighted_coeff(j, vp) - system.weighted_coeff(j, vm)) / (2.0 * h1);
      da11 = std::max(da11, block(da, n1, 0, 0).norm());
      da21 = std::max(da21, block(da, n1, 1, 0).norm());
    }
  }
  const double h2 = std::pow(std::numeric_limits<double>::epsilon(), 0.25) * scale;
  double hess = 0.0;
  for (int a = 0; a < n; ++a) {
    for (int b = a; b < n; ++b) {
      if (a >= n1 && b >= n1) continue;
      Vector ea = Vector::Zero(n), eb = Vector::Zero(n);
      ea(a) = h2;
      eb(b) = h2;
      const Vector second =
          (remainder(ea + eb) - remainder(ea - eb) - remainder(eb - ea) + remainder(-ea - eb)) /
          (4.0 * h2 * h2);
      hess = std::max(hess, second.norm());
    }
  }
  report.checks.push_back(make_check("refined.A11_at_equilibrium", a11, tolerance));
  report.checks.push_back(make_check("refined.dA11_dV1", da11, derivative_tol));
  report.checks.push_back(make_check("refined.dA21_dV1", da21, derivative_tol));
  report.checks.push_back(make_check("refined.remainder_hessian_offblock", hess, hessian_tol));
  return report;
}

SystemSpec linear_system_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidInput, std::string("system JSON: ") + e.what());
  }
  for (const char* key : {"d", "n", "n1", "A", "Lmat", "equilibrium"})
    if (!j.contains(key)) throw Error(ErrorCode::InvalidInput, std::string("missing key ") + key);
  SystemSpec s;
  s.name = j.value("name", std::string("linear"));
  s.d = j["d"].get<int>();
  s.n = j["n"].get<int>();
  s.n1 = j["n1"].get<int>();
  if (!j["A"].is_array() || j["A"].size() != static_cast<std::size_t>(s.d + 1))
    throw Error(ErrorCode::DimensionMismatch, "A must hold d+1 matrices");
  std::vector<Matrix> a;
  for (int k = 0; k <= s.d; ++k) a.push_back(matrix_from_json(j["A"][k], s.n, "A[" + std::to_string(k) + "]"));
  const Matrix l = matrix_from_json(j["Lmat"], s.n, "Lmat");
  if (!j["equilibrium"].is_array() || j["equilibrium"].size() != static_cast<std::size_t>(s.n))
    throw Error(ErrorCode::DimensionMismatch, "equilibrium must have length n");
  s.equilibrium.resize(s.n);
  for (int i = 0; i < s.n; ++i) s.equilibrium(i) = j["equilibrium"][i].get<double>();
  const Vector vbar = s.equilibrium;
  s.coeff = [a](int k, const Vector&) { return a.at(static_cast<std::size_t>(k)); };
  s.source = [l, vbar](const Vector& v) -> Vector { return -l * (v - vbar); };
  const int n = s.n;
  s.symmetrizer = [n](const Vector&) -> Matrix { return Matrix::Identity(n, n); };
  s.weighted_source_jacobian = [l](const Vector&) -> Matrix { return -l; };
  if (j.contains("neighborhood_radius")) s.neighborhood_radius = j["neighborhood_radius"].get<double>();
  validate(s);
  return s;
}

SystemSpec load_system_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return linear_system_from_json(ss.str());
}

std::vector<std::string> builtin_keys() {
  return {"euler-damped-1d", "euler-damped-2d", "euler-damped-3d"};
}

SystemSpec builtin_system(std::string_view key, double gamma, double lambda) {
  if (key == "euler-damped-1d") return make_euler_system(1, gamma, lambda);
  if (key == "euler-damped-2d") return make_euler_system(2, gamma, lambda);
  if (key == "euler-damped-3d") return make_euler_system(3, gamma, lambda);
  throw Error(ErrorCode::InvalidInput, "unknown built-in system " + std::string(key));
}

SystemSpec resolve_system(const std::string& key_or_path, double gamma, double lambda) {
  const auto keys = builtin_keys();
  if (std::find(keys.begin(), keys.end(), key_or_path) != keys.end())
    return builtin_system(key_or_path, gamma, lambda);
  return load_system_file(key_or_path);
}

}  // namespace hypocoax
