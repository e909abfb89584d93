#include "mtforge/femsolver.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/UmfPackSupport>

#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>

namespace mtforge
{

Eigen::VectorXcd dirichlet_values(const PaddedGrid &grid, const LayeredModel &background,
                                  double freq, Polarization pol)
{
  const EdgeNumbering numbering(grid);
  const std::vector<double> z_nodes(grid.z.data(), grid.z.data() + grid.z.size());
  const FieldProfile profile = boundary_field_profile(background, freq, z_nodes);

  Eigen::VectorXcd g = Eigen::VectorXcd::Zero(numbering.total_edges());
  const Dims3 c = grid.cells();
  if (pol == Polarization::X)
  {
    for (Index k = 0; k <= c.nz; ++k)
    {
      for (Index j = 0; j <= c.ny; ++j)
      {
        for (Index i = 0; i < c.nx; ++i)
        {
          const Index e = numbering.x_edge(i, j, k);
          if (numbering.on_boundary(e))
          {
            g[e] = profile.e[k];
          }
        }
      }
    }
  }
  else
  {
    for (Index k = 0; k <= c.nz; ++k)
    {
      for (Index j = 0; j < c.ny; ++j)
      {
        for (Index i = 0; i <= c.nx; ++i)
        {
          const Index e = numbering.y_edge(i, j, k);
          if (numbering.on_boundary(e))
          {
            g[e] = profile.e[k];
          }
        }
      }
    }
  }
  return g;
}

ConstrainedSystem apply_boundary(const AssembledSystem &system,
                                 const Eigen::MatrixXcd &boundary_values)
{
  const ComplexSparse &a = system.matrix;
  const Index n = a.rows();
  if (boundary_values.rows() != n || static_cast<Index>(system.dirichlet_mask.size()) != n)
  {
    throw std::invalid_argument("apply_boundary: boundary vector length mismatch");
  }

  ConstrainedSystem out;
  std::vector<Index> to_free(n, -1);
  for (Index e = 0; e < n; ++e)
  {
    if (!system.dirichlet_mask[e])
    {
      to_free[e] = static_cast<Index>(out.free_edges.size());
      out.free_edges.push_back(e);
    }
  }
  const Index m = static_cast<Index>(out.free_edges.size());
  const Index cols = boundary_values.cols();

  out.boundary_values = boundary_values;
  for (Index e = 0; e < n; ++e)
  {
    if (!system.dirichlet_mask[e])
    {
      out.boundary_values.row(e).setZero();
    }
  }
  out.rhs = Eigen::MatrixXcd::Zero(m, cols);
  out.matrix.resize(m, m);
  out.matrix.reserve(a.nonZeros());

  for (Index col = 0; col < n; ++col)
  {
    const Index fc = to_free[col];
    if (fc >= 0)
    {
      out.matrix.startVec(fc);
      for (ComplexSparse::InnerIterator it(a, col); it; ++it)
      {
        const Index fr = to_free[it.row()];
        if (fr >= 0)
        {
          out.matrix.insertBack(fr, fc) = it.value();
        }
      }
    }
    else
    {
      // Move the known column to the right-hand side.
      for (ComplexSparse::InnerIterator it(a, col); it; ++it)
      {
        const Index fr = to_free[it.row()];
        if (fr >= 0)
        {
          out.rhs.row(fr) -= it.value() * out.boundary_values.row(col);
        }
      }
    }
  }
  out.matrix.finalize();
  out.matrix.makeCompressed();
  return out;
}

ConstrainedSystem apply_boundary(const AssembledSystem &system, const PaddedGrid &grid,
                                 const LayeredModel &background,
                                 std::span<const Polarization> polarizations)
{
  Eigen::MatrixXcd g(system.matrix.rows(), static_cast<Index>(polarizations.size()));
  for (std::size_t p = 0; p < polarizations.size(); ++p)
  {
    g.col(static_cast<Index>(p)) =
      dirichlet_values(grid, background, system.frequency, polarizations[p]);
  }
  return apply_boundary(system, g);
}

namespace
{

double relative_residual(const ComplexSparse &a, const Eigen::VectorXcd &u,
                         const Eigen::VectorXcd &b)
{
  const double nb = b.norm();
  const double nr = (a * u - b).norm();
  return nb > 0.0 ? nr / nb : nr;
}

}  // namespace

SolveResult solve(const ConstrainedSystem &system, const SolverOptions &options)
{
  const Index m = system.matrix.rows();
  const Index cols = system.rhs.cols();
  SolveResult result;
  result.edge_fields = system.boundary_values;
  Eigen::MatrixXcd u(m, cols);

  auto direct = [&] {
    Eigen::UmfPackLU<ComplexSparse> lu;
    lu.umfpackControl()(UMFPACK_STRATEGY) = UMFPACK_STRATEGY_SYMMETRIC;
    lu.umfpackControl()(UMFPACK_ORDERING) = UMFPACK_ORDERING_METIS;
    {
      // METIS draws from a process-global RNG; concurrent orderings would
      // interleave it and make results depend on thread scheduling.
      static std::mutex ordering_mutex;
      std::lock_guard lock(ordering_mutex);
      lu.analyzePattern(system.matrix);
    }
    if (lu.info() == Eigen::Success)
    {
      lu.factorize(system.matrix);
    }
    if (lu.info() != Eigen::Success)
    {
      throw NumericFailure("solve: sparse LU factorization failed",
                           std::numeric_limits<double>::infinity());
    }
    u = lu.solve(system.rhs);
    result.iterative = false;
  };

  if (m > 0)
  {
    if (m <= options.iterative_threshold)
    {
      direct();
    }
    else
    {
      result.iterative = true;
      Eigen::BiCGSTAB<ComplexSparse, Eigen::DiagonalPreconditioner<Complex>> krylov;
      krylov.setTolerance(options.tolerance * 0.1);
      krylov.setMaxIterations(options.max_iterations);
      krylov.compute(system.matrix);
      bool converged = true;
      for (Index c = 0; c < cols && converged; ++c)
      {
        u.col(c) = krylov.solve(system.rhs.col(c));
        converged = relative_residual(system.matrix, u.col(c), system.rhs.col(c)) <=
                    options.tolerance;
      }
      if (!converged && options.direct_fallback)
      {
        direct();
      }
    }
  }

  for (Index c = 0; c < cols; ++c)
  {
    const double r = m > 0 ? relative_residual(system.matrix, u.col(c), system.rhs.col(c)) : 0.0;
    result.relative_residuals.push_back(r);
    if (!(r <= options.tolerance))
    {
      std::ostringstream msg;
      msg << "solve: relative residual " << r << " exceeds " << options.tolerance << " (column "
          << c << ", " << (result.iterative ? "BiCGSTAB" : "UMFPACK LU") << ", " << m
          << " unknowns)";
      throw NumericFailure(msg.str(), r);
    }
    for (Index p = 0; p < m; ++p)
    {
      result.edge_fields(system.free_edges[p], c) = u(p, c);
    }
  }
  return result;
}

SurfaceFields surface_fields(const Eigen::Ref<const Eigen::VectorXcd> &edge_field,
                             const PaddedGrid &grid, double freq)
{
  if (grid.n_air < 1)
  {
    throw std::invalid_argument("surface_fields: grid needs at least one air layer");
  }
  const EdgeNumbering numbering(grid);
  if (edge_field.size() != numbering.total_edges())
  {
    throw std::invalid_argument("surface_fields: edge field length mismatch");
  }
  const Index nx = grid.core.nx, ny = grid.core.ny;
  const Index ks = grid.surface_node();
  const Index ka = ks - 1;  // air cell directly above the surface
  const Complex to_h = -1.0 / Complex(0.0, angular_frequency(freq) * kMu0);

  SurfaceFields f;
  f.ex.resize(nx, ny);
  f.ey.resize(nx, ny);
  f.hx.resize(nx, ny);
  f.hy.resize(nx, ny);
  for (Index sj = 0; sj < ny; ++sj)
  {
    const Index j = grid.core_offset[1] + sj;
    for (Index si = 0; si < nx; ++si)
    {
      const Index i = grid.core_offset[0] + si;
      f.ex(si, sj) = 0.5 * (edge_field[numbering.x_edge(i, j, ks)] +
                            edge_field[numbering.x_edge(i, j + 1, ks)]);
      f.ey(si, sj) = 0.5 * (edge_field[numbering.y_edge(i, j, ks)] +
                            edge_field[numbering.y_edge(i + 1, j, ks)]);

      const Eigen::Vector3d h(grid.x[i + 1] - grid.x[i], grid.y[j + 1] - grid.y[j],
                              grid.z[ka + 1] - grid.z[ka]);
      // Centre of the air cell's bottom face, i.e. the station.
      const EdgeBasisValues basis = edge_basis(h, {0.5, 0.5, 1.0});
      const auto edges = numbering.cell_edges(i, j, ka);
      Eigen::Vector3cd curl = Eigen::Vector3cd::Zero();
      for (int a = 0; a < 12; ++a)
      {
        curl += basis.curl.col(a).cast<Complex>() * edge_field[edges[a]];
      }
      f.hx(si, sj) = to_h * curl.x();
      f.hy(si, sj) = to_h * curl.y();
    }
  }
  return f;
}

ImpedanceMap impedance_tensor(const SurfaceFields &p1, const SurfaceFields &p2, double freq)
{
  const Index nx = p1.ex.rows(), ny = p1.ex.cols();
  if (p2.ex.rows() != nx || p2.ex.cols() != ny || p1.hx.rows() != nx || p2.hx.rows() != nx)
  {
    throw std::invalid_argument("impedance_tensor: polarizations on different station grids");
  }
  const Eigen::ArrayXXcd zeta = p2.hy.array() * p1.hx.array() - p2.hx.array() * p1.hy.array();
  const double scale = (p1.hx.cwiseAbs2() + p1.hy.cwiseAbs2()).cwiseSqrt().cwiseProduct(
                         (p2.hx.cwiseAbs2() + p2.hy.cwiseAbs2()).cwiseSqrt())
                         .maxCoeff();
  for (Index j = 0; j < ny; ++j)
  {
    for (Index i = 0; i < nx; ++i)
    {
      if (!(std::abs(zeta(i, j)) >= 1e-3 * scale) || !(scale > 0.0))
      {
        std::ostringstream msg;
        msg << "impedance_tensor: singular station (" << i << ", " << j << "), |zeta| = "
            << std::abs(zeta(i, j));
        throw SingularStation(msg.str(), i, j);
      }
    }
  }

  const auto ex1 = p1.ex.array(), ey1 = p1.ey.array(), hx1 = p1.hx.array(), hy1 = p1.hy.array();
  const auto ex2 = p2.ex.array(), ey2 = p2.ey.array(), hx2 = p2.hx.array(), hy2 = p2.hy.array();

  ImpedanceMap z;
  z.nx = nx;
  z.ny = ny;
  z.nf = 1;
  z.freqs = {freq};
  const auto flat = [](const Eigen::ArrayXXcd &a) {
    return Eigen::ArrayXcd(Eigen::Map<const Eigen::ArrayXcd>(a.data(), a.size()));
  };
  z.zxx = flat((ex1 * hy2 - ex2 * hy1) / zeta);
  z.zxy = flat((ex2 * hx1 - ex1 * hx2) / zeta);
  z.zyx = flat((ey1 * hy2 - ey2 * hy1) / zeta);
  z.zyy = flat((ey2 * hx1 - ey1 * hx2) / zeta);
  return z;
}

ImpedanceMap stack_frequencies(std::span<const ImpedanceMap> maps)
{
  if (maps.empty())
  {
    return {};
  }
  ImpedanceMap out;
  out.nx = maps.front().nx;
  out.ny = maps.front().ny;
  for (const auto &m : maps)
  {
    if (m.nx != out.nx || m.ny != out.ny)
    {
      throw std::invalid_argument("stack_frequencies: station grids differ");
    }
    out.nf += m.nf;
    out.freqs.insert(out.freqs.end(), m.freqs.begin(), m.freqs.end());
  }
  const Index slab = out.nx * out.ny;
  out.zxx.resize(slab * out.nf);
  out.zxy.resize(slab * out.nf);
  out.zyx.resize(slab * out.nf);
  out.zyy.resize(slab * out.nf);
  Index offset = 0;
  for (const auto &m : maps)
  {
    const Index len = slab * m.nf;
    out.zxx.segment(offset, len) = m.zxx;
    out.zxy.segment(offset, len) = m.zxy;
    out.zyx.segment(offset, len) = m.zyx;
    out.zyy.segment(offset, len) = m.zyy;
    offset += len;
  }
  return out;
}

ResponseVolume<double> rho_phase(const ImpedanceMap &z)
{
  ResponseVolume<double> r(z.nx, z.ny, z.nf);
  const double to_deg = 180.0 / std::numbers::pi;
  const Index slab = z.nx * z.ny;
  for (Index f = 0; f < z.nf; ++f)
  {
    const double mu_omega = kMu0 * angular_frequency(z.freqs[f]);
    const auto zxy = z.zxy.segment(f * slab, slab);
    const auto zyx = z.zyx.segment(f * slab, slab);
    r.channel(Channel::RhoXY).segment(f * slab, slab) = zxy.abs2() / mu_omega;
    r.channel(Channel::RhoYX).segment(f * slab, slab) = zyx.abs2() / mu_omega;
    for (Index p = 0; p < slab; ++p)
    {
      r.channel(Channel::PhiXY)[f * slab + p] = std::arg(zxy[p]) * to_deg;
      double phi = std::arg(zyx[p]) * to_deg + 180.0;
      if (phi > 180.0)
      {
        phi -= 360.0;
      }
      r.channel(Channel::PhiYX)[f * slab + p] = phi;
    }
  }
  return r;
}

}  // namespace mtforge
