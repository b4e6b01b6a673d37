#pragma once

#include <Eigen/Core>
#include <array>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "filmflow/anisotropy.hpp"
#include "filmflow/grid.hpp"

namespace filmflow {

using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

/// Linear elastic stiffness C stored in Voigt form with engineering shear
/// strains, component order (xx, yy, zz, yz, xz, xy). Symmetry of the 6x6
/// matrix encodes both the major and the minor symmetries.
class ElasticTensor {
 public:
  static ElasticTensor lame(double lambda, double mu);
  /// Throws std::invalid_argument unless voigt is symmetric and coercive.
  static ElasticTensor from_voigt(const Mat6& voigt);

  const Mat6& voigt() const { return voigt_; }
  /// Largest k with C M : M >= 2k M : M for every symmetric M.
  double coercivity() const;
  /// W(M) = 1/2 C M : M
  double energy_density(const Mat3& strain) const;
  Mat3 stress(const Mat3& strain) const;
  /// C M : N for symmetric M, N
  double contract(const Mat3& m, const Mat3& n) const;
  ElasticTensor scaled(double s) const;

  bool operator==(const ElasticTensor&) const = default;

 private:
  Mat6 voigt_ = Mat6::Identity();
};

Vec6 to_voigt(const Mat3& strain);
Mat3 from_voigt(const Vec6& v);

/// Lattice mismatch e0 = (e1, e2). The physical invariant is e1, e2 > 0; the
/// zero mismatch is accepted as the degenerate elasticity-free setting.
struct Mismatch {
  double e1 = 0.0, e2 = 0.0;

  bool is_zero() const { return e1 == 0.0 && e2 == 0.0; }
  bool is_physical() const { return e1 > 0.0 && e2 > 0.0; }
  /// diag(e1, e2, 0): the strain of the affine substrate field.
  Mat3 strain() const;
  void validate() const;

  bool operator==(const Mismatch&) const = default;
};

/// Film slab Omega_h mapped onto Q x (0, 1) by (x, y) -> (x, y / h(x)):
/// n x n columns, `layers` hexahedra per column.
struct SlabMesh {
  GridSpec grid;
  int layers = 8;

  void validate() const;
  std::size_t node_count() const { return grid.size() * (layers + 1); }
  std::size_t element_count() const { return grid.size() * layers; }
  /// Unknown-node row index of (i, j, k), k >= 1.
  int row(int i, int j, int k) const { return ((k - 1) * grid.n + wrap(i, grid.n)) * grid.n + wrap(j, grid.n); }

  bool operator==(const SlabMesh&) const = default;
};

struct ElasticSolveError : std::runtime_error {
  ElasticSolveError(const std::string& what, double residual) : std::runtime_error(what), residual(residual) {}
  double residual;
};

/// Equilibrium displacement u = (e1 x1, e2 x2, 0) + r on the mapped slab,
/// with r periodic in x and zero on the substrate.
struct ElasticState {
  SlabMesh mesh;
  ElasticTensor tensor;
  Mismatch mismatch;
  GridProfile h;            // profile the state was solved on
  std::vector<Vec3> remainder;  // r at nodes, index (k * n + i) * n + j, k = 0..layers
  std::vector<Mat3> strain;     // Eu at element centroids, index (k * n + i) * n + j
  double energy = 0.0;          // W = int_{Omega_h} W(Eu)
  Field surface_trace;          // W(Eu) at (x, h(x))
  int cg_iterations = 0;
  double relative_residual = 0.0;

  std::size_t node_index(int i, int j, int k) const {
    const int n = mesh.grid.n;
    return (static_cast<std::size_t>(k) * n + wrap(i, n)) * n + wrap(j, n);
  }
  Vec3 node_position(int i, int j, int k) const;
  /// Full displacement (affine mismatch field plus periodic remainder).
  Vec3 displacement(int i, int j, int k) const;
};

/// 3x3-block compressed sparse rows.
struct BlockCsr {
  int rows = 0;
  std::vector<int> row_ptr, col;
  std::vector<Mat3> val;

  void multiply(const std::vector<Vec3>& x, std::vector<Vec3>& y) const;
  Eigen::MatrixXd dense() const;
};

struct LinearSystem {
  BlockCsr matrix;
  std::vector<Vec3> rhs;
};

struct SolverOptions {
  double rel_tol = 1e-10;
  double cap_factor = 20.0;  // iteration cap = cap_factor * sqrt(#unknowns)
};

/// Trilinear hexahedral FEM for div(C Eu) = 0 in Omega_h, C Eu[nu] = 0 on the
/// film surface, the mismatch Dirichlet row on the substrate and lateral
/// periodicity of the remainder. The sparsity pattern is built once per mesh.
class ElasticSolver {
 public:
  ElasticSolver(SlabMesh mesh, ElasticTensor tensor, Mismatch mismatch, SolverOptions options = {});

  const SlabMesh& mesh() const { return mesh_; }
  const ElasticTensor& tensor() const { return tensor_; }
  const Mismatch& mismatch() const { return mismatch_; }
  /// Positivity floor below which a profile is refused.
  double min_height() const { return min_height_; }
  void set_min_height(double floor) { min_height_ = floor; }

  /// Stiffness and load of the remainder unknowns on the slab under h.
  LinearSystem assemble(const GridProfile& h) const;

  /// Elastic equilibrium on h, optionally starting CG from `warm`'s remainder.
  ElasticState solve(const GridProfile& h, const ElasticState* warm = nullptr) const;

  /// Equilibrium state built from a remainder vector obtained elsewhere
  /// (e.g. a direct solve); fills energy, strains and trace.
  ElasticState make_state(const GridProfile& h, std::vector<Vec3> remainder) const;

 private:
  void check_profile(const GridProfile& h) const;

  SlabMesh mesh_;
  ElasticTensor tensor_;
  Mismatch mismatch_;
  SolverOptions options_;
  double min_height_ = 0.0;
  BlockCsr pattern_;
  std::vector<int> element_blocks_;  // per element, 8x8 block positions (-1: Dirichlet)
};

/// Discrete elastic energy of the frozen nodal field of `state` carried onto
/// the slab of h_trial (same mesh, nodes moved vertically).
double frozen_energy(const ElasticState& state, const GridProfile& h_trial);

/// Density g with sum g phi s^2 = d/ds frozen_energy(state, h + s phi) at
/// s = 0, h = state.h. At equilibrium this is the derivative of the
/// minimal elastic energy with respect to the film height.
Field shape_gradient(const ElasticState& state);
/// Same derivative of frozen_energy(state, .) taken at h_trial.
Field shape_gradient(const ElasticState& state, const GridProfile& h_trial);

/// W(Eu) at (x, h(x)), extrapolated from the Gauss points of the top layer
/// and averaged over the four elements sharing each surface node.
Field boundary_energy_density(const ElasticState& state, const GridProfile& h);

/// Closed-form affine equilibrium of a flat film: Eu = diag(e1, e2, 0) +
/// sym(c (x) e3) with (C Eu) e3 = 0.
struct FlatSolution {
  Vec3 vertical_gradient;  // c, so that r = c y
  Mat3 strain;
  double density;  // W(Eu)
};
FlatSolution flat_solution(const ElasticTensor& tensor, const Mismatch& mismatch);

/// The flat configuration's elastic state (d, u_d) on the given mesh.
ElasticState flat_equilibrium(double d, const SlabMesh& mesh, const ElasticTensor& tensor, const Mismatch& mismatch);

/// Node displacements and per-cell W(Eu) as structured-grid blocks, then a
/// "total_energy <W>" summary line.
void write_elastic_state(std::ostream& os, const ElasticState& state);

}  // namespace filmflow
