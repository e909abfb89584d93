#include "mtforge/femsolver.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>

using namespace mtforge;

namespace
{

// Exact 1D integrals of Lagrange hats on [0, h]: same side h/3, opposite h/6.
double hat_mass(int a, int b, double h) { return h * (a == b ? 1.0 / 3.0 : 1.0 / 6.0); }
// Exact integral of products of hat derivatives on [0, h]: (+-1/h)^2 * h.
double hat_stiff(int a, int b, double h) { return (a == b ? 1.0 : -1.0) / h; }

PaddedGrid small_grid(Dims3 core = {3, 3, 2}, int pad = 1, int air = 1)
{
  return build_padded_grid({core, {100.0, 120.0, 80.0}}, pad, 1.5, air);
}

Eigen::VectorXd random_conductivity(const PaddedGrid &g, unsigned seed)
{
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-3.0, 0.0);
  Eigen::VectorXd s(g.cells().size());
  for (Index p = 0; p < s.size(); ++p)
    s[p] = std::pow(10.0, u(rng));
  return s;
}

// Edge DOFs (tangential field values) of grad phi for a trilinear nodal phi.
Eigen::VectorXd gradient_edges(const PaddedGrid &g, const std::function<double(Index, Index, Index)> &phi)
{
  const EdgeNumbering n(g);
  Eigen::VectorXd out(n.total_edges());
  for (Index e = 0; e < n.total_edges(); ++e)
  {
    const EdgeCoord c = n.coord(e);
    const Index di = c.axis == Axis::X, dj = c.axis == Axis::Y, dk = c.axis == Axis::Z;
    const double len = c.axis == Axis::X ? g.x[c.i + 1] - g.x[c.i]
                       : c.axis == Axis::Y ? g.y[c.j + 1] - g.y[c.j]
                                           : g.z[c.k + 1] - g.z[c.k];
    out[e] = (phi(c.i + di, c.j + dj, c.k + dk) - phi(c.i, c.j, c.k)) / len;
  }
  return out;
}

}  // namespace

TEST(EdgeBasis, UnitTangentialOnOwnEdge)
{
  const Eigen::Vector3d h(2.0, 3.0, 5.0);
  for (int a = 0; a < 4; ++a)
  {
    const double lo = a & 1, hi = a >> 1;
    for (double t : {0.0, 0.3, 1.0})
    {
      const auto bx = edge_basis(h, {t, lo, hi});
      const auto by = edge_basis(h, {lo, t, hi});
      const auto bz = edge_basis(h, {lo, hi, t});
      for (int b = 0; b < 4; ++b)
      {
        EXPECT_DOUBLE_EQ(bx.value(0, b), a == b ? 1.0 : 0.0);
        EXPECT_DOUBLE_EQ(by.value(1, 4 + b), a == b ? 1.0 : 0.0);
        EXPECT_DOUBLE_EQ(bz.value(2, 8 + b), a == b ? 1.0 : 0.0);
      }
    }
  }
}

TEST(EdgeBasis, CurlMatchesFiniteDifferences)
{
  const Eigen::Vector3d h(2.0, 3.0, 5.0);
  const Eigen::Vector3d p(0.3, 0.6, 0.2);
  const double eps = 1e-6;
  auto value = [&](const Eigen::Vector3d &q) { return edge_basis(h, q).value; };
  Eigen::Matrix<double, 3, 12> d[3];
  for (int ax = 0; ax < 3; ++ax)
  {
    Eigen::Vector3d dp = Eigen::Vector3d::Zero();
    dp[ax] = eps;
    d[ax] = (value(p + dp) - value(p - dp)) / (2 * eps * h[ax]);  // physical derivative
  }
  const auto curl = edge_basis(h, p).curl;
  for (int a = 0; a < 12; ++a)
  {
    EXPECT_NEAR(curl(0, a), d[1](2, a) - d[2](1, a), 1e-8);
    EXPECT_NEAR(curl(1, a), d[2](0, a) - d[0](2, a), 1e-8);
    EXPECT_NEAR(curl(2, a), d[0](1, a) - d[1](0, a), 1e-8);
  }
}

TEST(ElementMatrices, MassMatchesClosedForm)
{
  const Eigen::Vector3d h(2.0, 3.0, 5.0);
  const auto em = element_matrices(h);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
    {
      const int la = a & 1, ha = a >> 1, lb = b & 1, hb = b >> 1;
      EXPECT_NEAR(em.mass(a, b), h.x() * hat_mass(la, lb, h.y()) * hat_mass(ha, hb, h.z()), 1e-12);
      EXPECT_NEAR(em.mass(4 + a, 4 + b), h.y() * hat_mass(la, lb, h.x()) * hat_mass(ha, hb, h.z()), 1e-12);
      EXPECT_NEAR(em.mass(8 + a, 8 + b), h.z() * hat_mass(la, lb, h.x()) * hat_mass(ha, hb, h.y()), 1e-12);
      EXPECT_EQ(em.mass(a, 4 + b), 0.0);
      EXPECT_EQ(em.mass(a, 8 + b), 0.0);
      EXPECT_EQ(em.mass(4 + a, 8 + b), 0.0);
    }
}

TEST(ElementMatrices, StiffnessMatchesClosedFormOnDiagonalBlock)
{
  // x-edges: curl N = (0, dN/dz, -dN/dy) with N = L_lo(y) L_hi(z).
  const Eigen::Vector3d h(2.0, 3.0, 5.0);
  const auto em = element_matrices(h);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
    {
      const int la = a & 1, ha = a >> 1, lb = b & 1, hb = b >> 1;
      const double expected = h.x() * (hat_mass(la, lb, h.y()) * hat_stiff(ha, hb, h.z()) +
                                       hat_stiff(la, lb, h.y()) * hat_mass(ha, hb, h.z()));
      EXPECT_NEAR(em.stiffness(a, b), expected, 1e-12);
    }
}

TEST(ElementMatrices, GradientsAreInTheStiffnessNullSpace)
{
  const Eigen::Vector3d h(2.0, 3.0, 5.0);
  const auto em = element_matrices(h);
  PaddedGrid cell;
  cell.x = Eigen::Vector2d(0.0, h.x());
  cell.y = Eigen::Vector2d(0.0, h.y());
  cell.z = Eigen::Vector2d(0.0, h.z());
  const auto edges = EdgeNumbering(cell).cell_edges(0, 0, 0);
  const Eigen::VectorXd g = gradient_edges(cell, [](Index i, Index j, Index k) {
    return std::sin(1.0 + i) + 2.0 * j - 0.7 * k + double(i * j * k);
  });
  Eigen::Matrix<double, 12, 1> local;
  for (int a = 0; a < 12; ++a)
    local[a] = g[edges[a]];
  EXPECT_LT((em.stiffness * local).norm(), 1e-12);
  EXPECT_TRUE(em.mass.isApprox(em.mass.transpose()));
  EXPECT_EQ(em.mass.llt().info(), Eigen::Success);
}

TEST(Assembly, MatchesDenseReference)
{
  const PaddedGrid g = build_padded_grid({{2, 2, 2}, {100.0, 150.0, 90.0}}, 1, 1.4, 1);  // 4x4x4 cells
  ASSERT_EQ(g.cells(), (Dims3{4, 4, 4}));
  const Eigen::VectorXd sigma = random_conductivity(g, 1);
  const auto op = assemble_operator(g, {sigma.data(), static_cast<std::size_t>(sigma.size())});

  const EdgeNumbering n(g);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n.total_edges(), n.total_edges());
  Eigen::MatrixXd M = S;
  for (Index k = 0; k < 4; ++k)
    for (Index j = 0; j < 4; ++j)
      for (Index i = 0; i < 4; ++i)
      {
        const auto em = element_matrices({g.x[i + 1] - g.x[i], g.y[j + 1] - g.y[j], g.z[k + 1] - g.z[k]});
        const auto e = n.cell_edges(i, j, k);
        for (int a = 0; a < 12; ++a)
          for (int b = 0; b < 12; ++b)
          {
            S(e[a], e[b]) += em.stiffness(a, b);
            M(e[a], e[b]) += sigma[g.cell_index(i, j, k)] * em.mass(a, b);
          }
      }
  EXPECT_LT((Eigen::MatrixXd(op.stiffness) - S).cwiseAbs().maxCoeff(), 1e-12 * S.cwiseAbs().maxCoeff());
  EXPECT_LT((Eigen::MatrixXd(op.mass) - M).cwiseAbs().maxCoeff(), 1e-12 * M.cwiseAbs().maxCoeff());

  const double f = 3.0;
  const AssembledSystem sys = assemble(op, n, f);
  const Eigen::MatrixXcd K = S.cast<Complex>() + Complex(0, angular_frequency(f) * kMu0) * M.cast<Complex>();
  EXPECT_LT((Eigen::MatrixXcd(sys.matrix) - K).cwiseAbs().maxCoeff(), 1e-12 * K.cwiseAbs().maxCoeff());
}

TEST(Assembly, SymmetricSparseAndGradientFree)
{
  const PaddedGrid g = small_grid({4, 3, 3}, 2, 2);
  const Eigen::VectorXd sigma = random_conductivity(g, 2);
  const std::span<const double> s(sigma.data(), static_cast<std::size_t>(sigma.size()));
  const AssembledSystem sys = assemble(g, s, 0.1);
  EXPECT_LE(symmetry_error(sys.matrix), 1e-12);
  for (Index c = 0; c < sys.matrix.outerSize(); ++c)
    EXPECT_LE(sys.matrix.col(c).nonZeros(), 33);

  const auto op = assemble_operator(g, s);
  const Eigen::VectorXd grad = gradient_edges(g, [](Index i, Index j, Index k) {
    return std::cos(0.3 * i) * (1.0 + j) + 0.2 * k * k;
  });
  EXPECT_LT((op.stiffness * grad).norm(), 1e-10 * (Eigen::MatrixXd(op.stiffness).norm() * grad.norm()));
  EXPECT_GT(grad.dot(op.mass * grad), 0.0);
}

TEST(Assembly, RejectsBadConductivity)
{
  const PaddedGrid g = small_grid();
  std::vector<double> sigma(g.cells().size() - 1, 1.0);
  EXPECT_THROW(assemble_operator(g, sigma), std::invalid_argument);
  sigma.assign(g.cells().size(), 1.0);
  sigma[3] = 0.0;
  EXPECT_THROW(assemble_operator(g, sigma), std::invalid_argument);
  sigma[3] = 1.0;
  EXPECT_THROW(assemble(g, sigma, 0.0), std::invalid_argument);
}

TEST(Boundary, DirichletValuesFollowTheLayeredProfile)
{
  const PaddedGrid g = small_grid({3, 3, 3}, 1, 2);
  const LayeredModel bg{{150.0}, {50.0, 500.0}};
  const double f = 2.0;
  const std::vector<double> z(g.z.data(), g.z.data() + g.z.size());
  const FieldProfile p = boundary_field_profile(bg, f, z);
  const EdgeNumbering n(g);
  for (Polarization pol : {Polarization::X, Polarization::Y})
  {
    const Eigen::VectorXcd v = dirichlet_values(g, bg, f, pol);
    const Axis active = pol == Polarization::X ? Axis::X : Axis::Y;
    for (Index e = 0; e < n.total_edges(); ++e)
    {
      const EdgeCoord c = n.coord(e);
      const Complex expected = (n.on_boundary(e) && c.axis == active) ? p.e[c.k] : Complex(0.0);
      EXPECT_EQ(v[e], expected) << e;
    }
  }
}

TEST(Boundary, EliminationReproducesTheFullSystem)
{
  const PaddedGrid g = small_grid({3, 2, 2}, 1, 1);
  const Eigen::VectorXd sigma = random_conductivity(g, 3);
  const std::span<const double> s(sigma.data(), static_cast<std::size_t>(sigma.size()));
  const AssembledSystem sys = assemble(g, s, 1.0);
  const LayeredModel bg = background_model(g, s);
  const std::array<Polarization, 2> pols{Polarization::X, Polarization::Y};
  const ConstrainedSystem cs = apply_boundary(sys, g, bg, pols);
  EXPECT_LE(symmetry_error(cs.matrix), 1e-12);

  const SolveResult sol = solve(cs);
  ASSERT_EQ(sol.edge_fields.cols(), 2);
  for (int c = 0; c < 2; ++c)
  {
    EXPECT_LE(sol.relative_residuals[c], 1e-8);
    const Eigen::VectorXcd r = sys.matrix * sol.edge_fields.col(c);
    double interior = 0.0, scale = 0.0;
    for (Index e = 0; e < r.size(); ++e)
    {
      if (!sys.dirichlet_mask[e])
        interior = std::max(interior, std::abs(r[e]));
      else
        EXPECT_EQ(sol.edge_fields(e, c), cs.boundary_values(e, c));
      scale = std::max(scale, std::abs(sol.edge_fields(e, c)));
    }
    EXPECT_LT(interior, 1e-8 * scale * Eigen::MatrixXcd(sys.matrix).cwiseAbs().maxCoeff());
  }
}

TEST(Solve, IterativePathAgreesWithDirect)
{
  const PaddedGrid g = small_grid({4, 4, 3}, 2, 2);
  Eigen::VectorXd sigma = Eigen::VectorXd::Constant(g.cells().size(), 0.01);
  for (Index k = 0; k < g.n_air; ++k)
    for (Index p = 0; p < g.nx() * g.ny(); ++p)
      sigma[k * g.nx() * g.ny() + p] = kAirConductivity;
  const std::span<const double> s(sigma.data(), static_cast<std::size_t>(sigma.size()));
  const AssembledSystem sys = assemble(g, s, 10.0);
  const std::array<Polarization, 2> pols{Polarization::X, Polarization::Y};
  const ConstrainedSystem cs = apply_boundary(sys, g, background_model(g, s), pols);

  const SolveResult direct = solve(cs);
  SolverOptions it;
  it.iterative_threshold = 0;
  const SolveResult iterative = solve(cs, it);
  EXPECT_FALSE(direct.iterative);
  for (int c = 0; c < 2; ++c)
    EXPECT_LE(iterative.relative_residuals[c], 1e-8);
  EXPECT_LT((direct.edge_fields - iterative.edge_fields).norm(), 1e-6 * direct.edge_fields.norm());
}

TEST(Solve, ReportsResidualFailure)
{
  const PaddedGrid g = small_grid({3, 3, 2}, 1, 1);
  Eigen::VectorXd sigma = Eigen::VectorXd::Constant(g.cells().size(), 0.1);
  const std::span<const double> s(sigma.data(), static_cast<std::size_t>(sigma.size()));
  const AssembledSystem sys = assemble(g, s, 1.0);
  const std::array<Polarization, 1> pols{Polarization::X};
  const ConstrainedSystem cs = apply_boundary(sys, g, background_model(g, s), pols);
  SolverOptions opts;
  opts.iterative_threshold = 0;
  opts.max_iterations = 1;
  opts.direct_fallback = false;
  EXPECT_THROW(solve(cs, opts), NumericFailure);
}

TEST(Impedance, RecoversSyntheticTensor)
{
  std::mt19937 rng(5);
  std::normal_distribution<double> n;
  auto rnd = [&] { return Complex(n(rng), n(rng)); };
  const Index nx = 3, ny = 2;
  SurfaceFields p1, p2;
  for (auto *p : {&p1, &p2})
  {
    p->ex.resize(nx, ny);
    p->ey.resize(nx, ny);
    p->hx.resize(nx, ny);
    p->hy.resize(nx, ny);
  }
  Eigen::ArrayXXcd zxx(nx, ny), zxy(nx, ny), zyx(nx, ny), zyy(nx, ny);
  for (Index j = 0; j < ny; ++j)
    for (Index i = 0; i < nx; ++i)
    {
      zxx(i, j) = rnd();
      zxy(i, j) = rnd();
      zyx(i, j) = rnd();
      zyy(i, j) = rnd();
      for (auto *p : {&p1, &p2})
      {
        p->hx(i, j) = rnd();
        p->hy(i, j) = rnd();
        p->ex(i, j) = zxx(i, j) * p->hx(i, j) + zxy(i, j) * p->hy(i, j);
        p->ey(i, j) = zyx(i, j) * p->hx(i, j) + zyy(i, j) * p->hy(i, j);
      }
    }
  const ImpedanceMap z = impedance_tensor(p1, p2, 1.0);
  for (Index j = 0; j < ny; ++j)
    for (Index i = 0; i < nx; ++i)
    {
      const Index q = z.index(i, j, 0);
      EXPECT_LT(std::abs(z.zxx[q] - zxx(i, j)), 1e-12);
      EXPECT_LT(std::abs(z.zxy[q] - zxy(i, j)), 1e-12);
      EXPECT_LT(std::abs(z.zyx[q] - zyx(i, j)), 1e-12);
      EXPECT_LT(std::abs(z.zyy[q] - zyy(i, j)), 1e-12);
    }

  // Parallel source fields at one station make zeta vanish.
  p2.hx(2, 1) = p1.hx(2, 1);
  p2.hy(2, 1) = p1.hy(2, 1);
  try
  {
    impedance_tensor(p1, p2, 1.0);
    FAIL() << "expected SingularStation";
  }
  catch (const SingularStation &e)
  {
    EXPECT_EQ(e.i(), 2);
    EXPECT_EQ(e.j(), 1);
  }
}

TEST(Impedance, RhoPhaseConventions)
{
  ImpedanceMap z;
  z.nx = 1;
  z.ny = 1;
  z.nf = 2;
  z.freqs = {1.0, 10.0};
  const double rho = 100.0;
  auto zhs = [&](double f) { return Complex(1, 1) * std::sqrt(angular_frequency(f) * kMu0 * rho / 2.0); };
  z.zxy = Eigen::ArrayXcd(2);
  z.zyx = Eigen::ArrayXcd(2);
  z.zxx = Eigen::ArrayXcd::Zero(2);
  z.zyy = Eigen::ArrayXcd::Zero(2);
  z.zxy << zhs(1.0), zhs(10.0);
  z.zyx << -zhs(1.0), -zhs(10.0) * std::polar(1.0, 0.1);
  const ResponseVolume<double> r = rho_phase(z);
  EXPECT_NEAR(r(Channel::RhoXY, 0, 0, 0), rho, 1e-10);
  EXPECT_NEAR(r(Channel::RhoYX, 0, 0, 1), rho, 1e-10);
  EXPECT_NEAR(r(Channel::PhiXY, 0, 0, 1), 45.0, 1e-10);
  EXPECT_NEAR(r(Channel::PhiYX, 0, 0, 0), 45.0, 1e-10);
  EXPECT_NEAR(r(Channel::PhiYX, 0, 0, 1), 45.0 + 0.1 * 180.0 / std::numbers::pi, 1e-10);
}

TEST(Impedance, StackFrequencies)
{
  ImpedanceMap a, b;
  for (auto *m : {&a, &b})
  {
    m->nx = 2;
    m->ny = 1;
    m->nf = 1;
    m->zxx = m->zxy = m->zyx = m->zyy = Eigen::ArrayXcd::Constant(2, m == &a ? 1.0 : 2.0);
  }
  a.freqs = {1.0};
  b.freqs = {2.0};
  const std::array<ImpedanceMap, 2> maps{a, b};
  const ImpedanceMap s = stack_frequencies(maps);
  EXPECT_EQ(s.nf, 2);
  EXPECT_EQ(s.freqs, (std::vector<double>{1.0, 2.0}));
  EXPECT_EQ(s.zxy[s.index(1, 0, 1)], Complex(2.0));
  EXPECT_EQ(s.zxy[s.index(1, 0, 0)], Complex(1.0));
}
