#pragma once

#include "mtforge/analytic1d.hpp"
#include "mtforge/mesh.hpp"
#include "mtforge/types.hpp"

#include <Eigen/SparseCore>

#include <span>
#include <vector>

namespace mtforge
{

using ComplexSparse = Eigen::SparseMatrix<Complex>;
using RealSparse = Eigen::SparseMatrix<double>;

using ElementMatrix = Eigen::Matrix<double, 12, 12>;

/// Lowest-order edge (Nedelec) basis on a brick of size h, evaluated at the
/// reference point (xi, eta, zeta) in [0,1]^3. Columns follow the local edge
/// order of EdgeNumbering::cell_edges.
struct EdgeBasisValues
{
  Eigen::Matrix<double, 3, 12> value;
  Eigen::Matrix<double, 3, 12> curl;
};
EdgeBasisValues edge_basis(const Eigen::Vector3d &h, const Eigen::Vector3d &ref_point);

/// Curl-curl stiffness and unit-conductivity mass of one brick, 2x2x2 Gauss.
struct ElementMatrices
{
  ElementMatrix stiffness;
  ElementMatrix mass;
};
ElementMatrices element_matrices(const Eigen::Vector3d &h);

/// Frequency-independent parts of the global system: K(f) = S + i w mu M_sigma.
/// Both matrices share one sparsity pattern.
struct CurlCurlOperator
{
  RealSparse stiffness;
  RealSparse mass;  // conductivity weighted
};
CurlCurlOperator assemble_operator(const PaddedGrid &grid, std::span<const double> conductivity);

struct AssembledSystem
{
  ComplexSparse matrix;
  double frequency = 0.0;
  std::vector<bool> dirichlet_mask;  // boundary (tangential) edges
};

AssembledSystem assemble(const PaddedGrid &grid, std::span<const double> conductivity, double freq);
AssembledSystem assemble(const CurlCurlOperator &op, const EdgeNumbering &numbering, double freq);

/// max |A - A^T| / max |A|.
double symmetry_error(const ComplexSparse &matrix);

enum class Polarization
{
  X,
  Y,
};

/// Full-length edge vector holding the 1D plane-wave field on boundary edges
/// (zero elsewhere). The polarized component follows the layered profile with
/// depth; transverse components are zero.
Eigen::VectorXcd dirichlet_values(const PaddedGrid &grid, const LayeredModel &background,
                                  double freq, Polarization pol);

/// Interior system after Dirichlet elimination: A_II u_I = -A_IB g_B. One rhs
/// column per boundary-value column; the matrix is shared.
struct ConstrainedSystem
{
  ComplexSparse matrix;
  Eigen::MatrixXcd rhs;
  Eigen::MatrixXcd boundary_values;  // full length, one column per rhs
  std::vector<Index> free_edges;     // interior index -> global edge
};

ConstrainedSystem apply_boundary(const AssembledSystem &system,
                                 const Eigen::MatrixXcd &boundary_values);
ConstrainedSystem apply_boundary(const AssembledSystem &system, const PaddedGrid &grid,
                                 const LayeredModel &background,
                                 std::span<const Polarization> polarizations);

struct SolverOptions
{
  /// Above this many unknowns use Jacobi-preconditioned BiCGSTAB instead of
  /// sparse LU.
  Index iterative_threshold = 150000;
  double tolerance = 1e-8;
  int max_iterations = 20000;
  /// Refactorize directly when BiCGSTAB misses the tolerance.
  bool direct_fallback = true;
};

struct SolveResult
{
  Eigen::MatrixXcd edge_fields;          // global edge values, one column per rhs
  std::vector<double> relative_residuals;  // ||A u - b|| / ||b|| per column
  bool iterative = false;
};

/// Throws NumericFailure if any column misses the residual tolerance.
SolveResult solve(const ConstrainedSystem &system, const SolverOptions &options = {});

/// Station fields over the core surface cells (nx x ny, x fastest).
struct SurfaceFields
{
  Eigen::MatrixXcd ex, ey, hx, hy;
};

/// E at the station (centre of the core surface face) from the two surface
/// edges; H = -curl E / (i w mu) from the air cell directly above it.
SurfaceFields surface_fields(const Eigen::Ref<const Eigen::VectorXcd> &edge_field,
                             const PaddedGrid &grid, double freq);

/// Complex impedance per station and frequency; element (i, j, f) lives at
/// i + nx*(j + ny*f).
struct ImpedanceMap
{
  Index nx = 0, ny = 0, nf = 0;
  std::vector<double> freqs;
  Eigen::ArrayXcd zxx, zxy, zyx, zyy;

  Index index(Index i, Index j, Index f) const { return i + nx * (j + ny * f); }
};

class SingularStation : public std::runtime_error
{
public:
  SingularStation(const std::string &what, Index i, Index j)
    : std::runtime_error(what), i_(i), j_(j)
  {
  }
  Index i() const { return i_; }
  Index j() const { return j_; }

private:
  Index i_, j_;
};

/// Two-polarization impedance tensor at one frequency.
ImpedanceMap impedance_tensor(const SurfaceFields &pol1, const SurfaceFields &pol2, double freq);

/// Concatenate single-frequency maps along frequency.
ImpedanceMap stack_frequencies(std::span<const ImpedanceMap> maps);

/// rho_ij = |Z_ij|^2 / (mu w), phi_ij = arg Z_ij in degrees; phi_yx is shifted
/// by 180 degrees into the first quadrant.
ResponseVolume<double> rho_phase(const ImpedanceMap &z);

// --- forward operator -------------------------------------------------------

/// Per-cell conductivity on the padded grid: lateral pads copy the nearest
/// core column, bottom pads repeat the deepest core layer, air gets kAirConductivity.
Eigen::VectorXd padded_conductivity(const ResistivityModel<double> &model, const PaddedGrid &grid);

/// Layered background from the arithmetic mean conductivity of each earth
/// layer of the padded grid; the deepest layer becomes the half-space.
LayeredModel background_model(const PaddedGrid &grid, std::span<const double> conductivity);

struct ForwardOptions
{
  int threads = 1;
  SolverOptions solver;
};

struct FrequencyDiagnostics
{
  double frequency = 0.0;
  Index unknowns = 0;
  double symmetry_error = 0.0;
  std::array<double, 2> residuals{};
  bool iterative = false;
};

struct ForwardResult
{
  ResponseVolume<double> response;
  ImpedanceMap impedance;
  std::vector<FrequencyDiagnostics> diagnostics;
};

ForwardResult forward(const ResistivityModel<double> &model, const GridSpec &grid,
                      std::span<const double> freqs, const ForwardOptions &options = {});

}  // namespace mtforge
