#include "mtforge/femsolver.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <tuple>

namespace mtforge
{

namespace
{

// 1D Lagrange hats on [0,1] and their derivatives.
inline double hat(int side, double t) { return side == 0 ? 1.0 - t : t; }
inline double dhat(int side) { return side == 0 ? -1.0 : 1.0; }

}  // namespace

EdgeBasisValues edge_basis(const Eigen::Vector3d &h, const Eigen::Vector3d &p)
{
  EdgeBasisValues b;
  b.value.setZero();
  b.curl.setZero();
  const double xi = p.x(), eta = p.y(), zeta = p.z();
  for (int a = 0; a < 4; ++a)
  {
    const int lo = a & 1, hi = a >> 1;

    // x-edge: N = (f, 0, 0), f = L_j(eta) L_k(zeta); curl = (0, df/dz, -df/dy)
    {
      const double f = hat(lo, eta) * hat(hi, zeta);
      const double dfdy = dhat(lo) * hat(hi, zeta) / h.y();
      const double dfdz = hat(lo, eta) * dhat(hi) / h.z();
      b.value(0, a) = f;
      b.curl.col(a) << 0.0, dfdz, -dfdy;
    }
    // y-edge: N = (0, g, 0), g = L_i(xi) L_k(zeta); curl = (-dg/dz, 0, dg/dx)
    {
      const double g = hat(lo, xi) * hat(hi, zeta);
      const double dgdx = dhat(lo) * hat(hi, zeta) / h.x();
      const double dgdz = hat(lo, xi) * dhat(hi) / h.z();
      b.value(1, 4 + a) = g;
      b.curl.col(4 + a) << -dgdz, 0.0, dgdx;
    }
    // z-edge: N = (0, 0, q), q = L_i(xi) L_j(eta); curl = (dq/dy, -dq/dx, 0)
    {
      const double q = hat(lo, xi) * hat(hi, eta);
      const double dqdx = dhat(lo) * hat(hi, eta) / h.x();
      const double dqdy = hat(lo, xi) * dhat(hi) / h.y();
      b.value(2, 8 + a) = q;
      b.curl.col(8 + a) << dqdy, -dqdx, 0.0;
    }
  }
  return b;
}

ElementMatrices element_matrices(const Eigen::Vector3d &h)
{
  const double g = 0.5 / std::sqrt(3.0);
  const std::array<double, 2> gauss{0.5 - g, 0.5 + g};
  const double weight = 0.125 * h.prod();  // 8 points, equal weights

  ElementMatrices em;
  em.stiffness.setZero();
  em.mass.setZero();
  for (double zeta : gauss)
  {
    for (double eta : gauss)
    {
      for (double xi : gauss)
      {
        const EdgeBasisValues b = edge_basis(h, {xi, eta, zeta});
        em.stiffness.noalias() += weight * b.curl.transpose() * b.curl;
        em.mass.noalias() += weight * b.value.transpose() * b.value;
      }
    }
  }
  return em;
}

CurlCurlOperator assemble_operator(const PaddedGrid &grid, std::span<const double> conductivity)
{
  const Dims3 cells = grid.cells();
  if (static_cast<Index>(conductivity.size()) != cells.size())
  {
    throw std::invalid_argument("assemble: conductivity has " + std::to_string(conductivity.size()) +
                                " entries, grid has " + std::to_string(cells.size()) + " cells");
  }
  const EdgeNumbering numbering(cells);
  const Index n = numbering.total_edges();

  CurlCurlOperator op;
  op.stiffness.resize(n, n);
  op.mass.resize(n, n);
  op.stiffness.reserve(Eigen::VectorXi::Constant(n, 33));
  op.mass.reserve(Eigen::VectorXi::Constant(n, 33));

  // Element matrices depend only on the cell size; padded grids repeat sizes.
  std::map<std::tuple<double, double, double>, ElementMatrices> cache;

  for (Index k = 0; k < cells.nz; ++k)
  {
    const double hz = grid.z[k + 1] - grid.z[k];
    for (Index j = 0; j < cells.ny; ++j)
    {
      const double hy = grid.y[j + 1] - grid.y[j];
      for (Index i = 0; i < cells.nx; ++i)
      {
        const double hx = grid.x[i + 1] - grid.x[i];
        auto [it, inserted] = cache.try_emplace({hx, hy, hz});
        if (inserted)
        {
          it->second = element_matrices({hx, hy, hz});
        }
        const ElementMatrices &em = it->second;
        const double sigma = conductivity[grid.cell_index(i, j, k)];
        if (!(sigma > 0.0))
        {
          throw std::invalid_argument("assemble: conductivity must be positive");
        }
        const auto edges = numbering.cell_edges(i, j, k);
        for (int b = 0; b < 12; ++b)
        {
          for (int a = 0; a < 12; ++a)
          {
            op.stiffness.coeffRef(edges[a], edges[b]) += em.stiffness(a, b);
            op.mass.coeffRef(edges[a], edges[b]) += sigma * em.mass(a, b);
          }
        }
      }
    }
  }
  op.stiffness.makeCompressed();
  op.mass.makeCompressed();
  return op;
}

AssembledSystem assemble(const CurlCurlOperator &op, const EdgeNumbering &numbering, double freq)
{
  if (!(freq > 0.0))
  {
    throw std::invalid_argument("assemble: frequency must be positive");
  }
  AssembledSystem sys;
  sys.frequency = freq;
  sys.matrix = op.stiffness.cast<Complex>();
  const Complex factor(0.0, angular_frequency(freq) * kMu0);
  // Identical patterns: add the mass term value-by-value.
  const Index nnz = sys.matrix.nonZeros();
  Complex *values = sys.matrix.valuePtr();
  const double *mass = op.mass.valuePtr();
  for (Index p = 0; p < nnz; ++p)
  {
    values[p] += factor * mass[p];
  }

  sys.dirichlet_mask.resize(numbering.total_edges());
  for (Index e = 0; e < numbering.total_edges(); ++e)
  {
    sys.dirichlet_mask[e] = numbering.on_boundary(e);
  }
  return sys;
}

AssembledSystem assemble(const PaddedGrid &grid, std::span<const double> conductivity, double freq)
{
  return assemble(assemble_operator(grid, conductivity), EdgeNumbering(grid), freq);
}

double symmetry_error(const ComplexSparse &matrix)
{
  const ComplexSparse diff = matrix - ComplexSparse(matrix.transpose());
  double max_diff = 0.0, max_abs = 0.0;
  for (Index p = 0; p < diff.nonZeros(); ++p)
  {
    max_diff = std::max(max_diff, std::abs(diff.valuePtr()[p]));
  }
  for (Index p = 0; p < matrix.nonZeros(); ++p)
  {
    max_abs = std::max(max_abs, std::abs(matrix.valuePtr()[p]));
  }
  return max_abs > 0.0 ? max_diff / max_abs : 0.0;
}

}  // namespace mtforge
