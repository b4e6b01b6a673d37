#include "filmflow/elasticity.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "filmflow/geometry.hpp"

namespace filmflow {

// ---------------------------------------------------------------------------
// Tensor algebra

Vec6 to_voigt(const Mat3& m) {
  Vec6 v;
  v << m(0, 0), m(1, 1), m(2, 2), m(1, 2) + m(2, 1), m(0, 2) + m(2, 0), m(0, 1) + m(1, 0);
  return v;
}

Mat3 from_voigt(const Vec6& v) {
  Mat3 m;
  m << v[0], 0.5 * v[5], 0.5 * v[4],  //
      0.5 * v[5], v[1], 0.5 * v[3],   //
      0.5 * v[4], 0.5 * v[3], v[2];
  return m;
}

ElasticTensor ElasticTensor::lame(double lambda, double mu) {
  if (!std::isfinite(lambda) || !std::isfinite(mu) || !(mu > 0.0) || !(3.0 * lambda + 2.0 * mu > 0.0))
    throw std::invalid_argument("ElasticTensor::lame: need mu > 0 and 3 lambda + 2 mu > 0");
  Mat6 c = Mat6::Zero();
  c.topLeftCorner<3, 3>().setConstant(lambda);
  for (int i = 0; i < 3; ++i) c(i, i) += 2.0 * mu;
  for (int i = 3; i < 6; ++i) c(i, i) = mu;
  ElasticTensor t;
  t.voigt_ = c;
  return t;
}

ElasticTensor ElasticTensor::from_voigt(const Mat6& voigt) {
  if (!voigt.allFinite()) throw std::invalid_argument("ElasticTensor: entries must be finite");
  if ((voigt - voigt.transpose()).cwiseAbs().maxCoeff() > 1e-12 * voigt.cwiseAbs().maxCoeff())
    throw std::invalid_argument("ElasticTensor: Voigt matrix must be symmetric");
  ElasticTensor t;
  t.voigt_ = 0.5 * (voigt + voigt.transpose());
  if (!(t.coercivity() > 0.0)) throw std::invalid_argument("ElasticTensor: tensor is not coercive");
  return t;
}

double ElasticTensor::coercivity() const {
  // M:M = v^T D v with D = diag(1, 1, 1, 1/2, 1/2, 1/2) in engineering Voigt form.
  Vec6 dinv_sqrt;
  dinv_sqrt << 1.0, 1.0, 1.0, std::sqrt(2.0), std::sqrt(2.0), std::sqrt(2.0);
  const Mat6 scaled = dinv_sqrt.asDiagonal() * voigt_ * dinv_sqrt.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Mat6> eig(scaled, Eigen::EigenvaluesOnly);
  return 0.5 * eig.eigenvalues()[0];
}

double ElasticTensor::energy_density(const Mat3& strain) const {
  const Vec6 v = to_voigt(strain);
  return 0.5 * v.dot(voigt_ * v);
}

Mat3 ElasticTensor::stress(const Mat3& strain) const {
  const Vec6 s = voigt_ * to_voigt(strain);
  Mat3 m;
  m << s[0], s[5], s[4], s[5], s[1], s[3], s[4], s[3], s[2];
  return m;
}

double ElasticTensor::contract(const Mat3& m, const Mat3& n) const { return to_voigt(m).dot(voigt_ * to_voigt(n)); }

ElasticTensor ElasticTensor::scaled(double s) const {
  if (!(s > 0.0)) throw std::invalid_argument("ElasticTensor::scaled: factor must be positive");
  ElasticTensor t = *this;
  t.voigt_ *= s;
  return t;
}

Mat3 Mismatch::strain() const {
  Mat3 m = Mat3::Zero();
  m(0, 0) = e1;
  m(1, 1) = e2;
  return m;
}

void Mismatch::validate() const {
  if (!std::isfinite(e1) || !std::isfinite(e2) || e1 < 0.0 || e2 < 0.0)
    throw std::invalid_argument("mismatch: components must be finite and non-negative");
}

void SlabMesh::validate() const {
  grid.validate();
  if (layers < 4) throw std::invalid_argument("slab mesh: need at least 4 layers");
}

Vec3 ElasticState::node_position(int i, int j, int k) const {
  const double s = mesh.grid.spacing();
  return {i * s, j * s, h(i, j) * k / mesh.layers};
}

Vec3 ElasticState::displacement(int i, int j, int k) const {
  const Vec3 x = node_position(i, j, k);
  return Vec3(mismatch.e1 * x[0], mismatch.e2 * x[1], 0.0) + remainder[node_index(i, j, k)];
}

// ---------------------------------------------------------------------------
// Block CSR

void BlockCsr::multiply(const std::vector<Vec3>& x, std::vector<Vec3>& y) const {
  y.resize(rows);
  for (int r = 0; r < rows; ++r) {
    Vec3 acc = Vec3::Zero();
    for (int p = row_ptr[r]; p < row_ptr[r + 1]; ++p) acc.noalias() += val[p] * x[col[p]];
    y[r] = acc;
  }
}

Eigen::MatrixXd BlockCsr::dense() const {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3 * rows, 3 * rows);
  for (int r = 0; r < rows; ++r)
    for (int p = row_ptr[r]; p < row_ptr[r + 1]; ++p) a.block<3, 3>(3 * r, 3 * col[p]) = val[p];
  return a;
}

// ---------------------------------------------------------------------------
// Element kernels

namespace {

const double kGauss[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};

inline double lin(int a, double x) { return a ? x : 1.0 - x; }
inline double dlin(int a) { return a ? 1.0 : -1.0; }

// Physical gradients of the 8 trilinear shape functions at one Gauss point of
// element layer k with corner heights hc (index ax + 2 ay), and the volume
// weight det(F) * w.
template <class T>
void shape_gradients(const std::array<T, 4>& hc, int k, int layers, double s, int q, std::array<std::array<T, 3>, 8>& grad,
                     T& weight) {
  const double x1 = kGauss[q & 1], x2 = kGauss[(q >> 1) & 1], x3 = kGauss[(q >> 2) & 1];
  T hb(0.0), hb1(0.0), hb2(0.0);
  for (int c = 0; c < 4; ++c) {
    const int cx = c & 1, cy = c >> 1;
    hb += hc[c] * T(lin(cx, x1) * lin(cy, x2));
    hb1 += hc[c] * T(dlin(cx) * lin(cy, x2));
    hb2 += hc[c] * T(lin(cx, x1) * dlin(cy));
  }
  const double frac = (k + x3) / layers;
  const T z1 = hb1 * T(frac), z2 = hb2 * T(frac), z3 = hb * T(1.0 / layers);
  const T a1 = z1 / (z3 * T(s)), a2 = z2 / (z3 * T(s)), a3 = T(1.0) / z3;
  for (int a = 0; a < 8; ++a) {
    const int ax = a & 1, ay = (a >> 1) & 1, az = a >> 2;
    const double n1 = dlin(ax) * lin(ay, x2) * lin(az, x3);
    const double n2 = lin(ax, x1) * dlin(ay) * lin(az, x3);
    const double n3 = lin(ax, x1) * lin(ay, x2) * dlin(az);
    grad[a][0] = T(n1 / s) - a1 * T(n3);
    grad[a][1] = T(n2 / s) - a2 * T(n3);
    grad[a][2] = a3 * T(n3);
  }
  weight = z3 * T(s * s / 8.0);
}

// Voigt strain (engineering shear) of eps0 + sym(D r) at one Gauss point.
template <class T>
std::array<T, 6> strain_at(const std::array<std::array<T, 3>, 8>& grad, const std::array<Vec3, 8>& r, const Vec6& eps0) {
  std::array<T, 6> e;
  for (int c = 0; c < 6; ++c) e[c] = T(eps0[c]);
  for (int a = 0; a < 8; ++a) {
    const Vec3& u = r[a];
    const auto& g = grad[a];
    e[0] += g[0] * T(u[0]);
    e[1] += g[1] * T(u[1]);
    e[2] += g[2] * T(u[2]);
    e[3] += g[2] * T(u[1]) + g[1] * T(u[2]);
    e[4] += g[2] * T(u[0]) + g[0] * T(u[2]);
    e[5] += g[1] * T(u[0]) + g[0] * T(u[1]);
  }
  return e;
}

template <class T>
T quad_form(const Mat6& c, const std::array<T, 6>& e) {
  T acc(0.0);
  for (int a = 0; a < 6; ++a) {
    T row(0.0);
    for (int b = 0; b < 6; ++b) row += T(c(a, b)) * e[b];
    acc += e[a] * row;
  }
  return acc;
}

template <class T>
T element_energy(const std::array<T, 4>& hc, int k, int layers, double s, const std::array<Vec3, 8>& r, const Mat6& c,
                 const Vec6& eps0) {
  T total(0.0);
  std::array<std::array<T, 3>, 8> grad;
  T w;
  for (int q = 0; q < 8; ++q) {
    shape_gradients(hc, k, layers, s, q, grad, w);
    total += T(0.5) * quad_form(c, strain_at(grad, r, eps0)) * w;
  }
  return total;
}

using Mat24 = Eigen::Matrix<double, 24, 24>;
using Vec24 = Eigen::Matrix<double, 24, 1>;
using Mat63 = Eigen::Matrix<double, 6, 3>;

// B_a^T v for the engineering-shear strain operator of node a with gradient g.
inline Vec3 strain_transpose(const std::array<double, 3>& g, const Vec6& v) {
  return {g[0] * v[0] + g[2] * v[4] + g[1] * v[5], g[1] * v[1] + g[2] * v[3] + g[0] * v[5],
          g[2] * v[2] + g[1] * v[3] + g[0] * v[4]};
}

void element_system(const std::array<double, 4>& hc, int k, int layers, double s, const Mat6& c, const Vec6& eps0,
                    Mat24& ke, Vec24& fe) {
  ke.setZero();
  fe.setZero();
  std::array<std::array<double, 3>, 8> grad;
  double w;
  const Vec6 sigma0 = c * eps0;
  std::array<Mat63, 8> cb;
  for (int q = 0; q < 8; ++q) {
    shape_gradients(hc, k, layers, s, q, grad, w);
    for (int b = 0; b < 8; ++b) {
      const auto& g = grad[b];
      cb[b].col(0) = w * (c.col(0) * g[0] + c.col(4) * g[2] + c.col(5) * g[1]);
      cb[b].col(1) = w * (c.col(1) * g[1] + c.col(3) * g[2] + c.col(5) * g[0]);
      cb[b].col(2) = w * (c.col(2) * g[2] + c.col(3) * g[1] + c.col(4) * g[0]);
    }
    for (int a = 0; a < 8; ++a) {
      const auto& g = grad[a];
      for (int b = a; b < 8; ++b) {
        const Mat63& m = cb[b];
        Mat3 blk;
        blk.row(0) = g[0] * m.row(0) + g[2] * m.row(4) + g[1] * m.row(5);
        blk.row(1) = g[1] * m.row(1) + g[2] * m.row(3) + g[0] * m.row(5);
        blk.row(2) = g[2] * m.row(2) + g[1] * m.row(3) + g[0] * m.row(4);
        ke.block<3, 3>(3 * a, 3 * b) += blk;
      }
      fe.segment<3>(3 * a) -= w * strain_transpose(g, sigma0);
    }
  }
  for (int a = 0; a < 8; ++a)
    for (int b = 0; b < a; ++b) ke.block<3, 3>(3 * a, 3 * b) = ke.block<3, 3>(3 * b, 3 * a).transpose();
}

std::array<double, 4> corner_heights(const GridProfile& h, int i, int j) {
  return {h(i, j), h(i + 1, j), h(i, j + 1), h(i + 1, j + 1)};
}

std::array<Vec3, 8> element_remainder(const ElasticState& st, int i, int j, int k) {
  std::array<Vec3, 8> r;
  for (int a = 0; a < 8; ++a) r[a] = st.remainder[st.node_index(i + (a & 1), j + ((a >> 1) & 1), k + (a >> 2))];
  return r;
}

void require_same_grid(const ElasticState& st, const GridProfile& h, const char* what) {
  if (!(h.spec() == st.mesh.grid) || h.size() != st.mesh.grid.size())
    throw std::invalid_argument(std::string(what) + ": profile grid does not match the elastic mesh");
}

Vec6 mismatch_voigt(const Mismatch& e) { return to_voigt(e.strain()); }

}  // namespace

// ---------------------------------------------------------------------------
// Solver

ElasticSolver::ElasticSolver(SlabMesh mesh, ElasticTensor tensor, Mismatch mismatch, SolverOptions options)
    : mesh_(mesh), tensor_(std::move(tensor)), mismatch_(mismatch), options_(options) {
  mesh_.validate();
  mismatch_.validate();
  const int n = mesh_.grid.n, m = mesh_.layers;
  const int rows = n * n * m;

  pattern_.rows = rows;
  pattern_.row_ptr.assign(rows + 1, 0);
  std::vector<int> cols;
  for (int k = 1; k <= m; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        cols.clear();
        for (int dk = -1; dk <= 1; ++dk) {
          const int kk = k + dk;
          if (kk < 1 || kk > m) continue;
          for (int di = -1; di <= 1; ++di)
            for (int dj = -1; dj <= 1; ++dj) cols.push_back(mesh_.row(i + di, j + dj, kk));
        }
        std::sort(cols.begin(), cols.end());
        const int r = mesh_.row(i, j, k);
        pattern_.col.insert(pattern_.col.end(), cols.begin(), cols.end());
        pattern_.row_ptr[r + 1] = static_cast<int>(cols.size());
      }
  for (int r = 0; r < rows; ++r) pattern_.row_ptr[r + 1] += pattern_.row_ptr[r];
  pattern_.val.assign(pattern_.col.size(), Mat3::Zero());

  auto locate = [&](int r, int c) {
    const auto b = pattern_.col.begin() + pattern_.row_ptr[r], e = pattern_.col.begin() + pattern_.row_ptr[r + 1];
    return static_cast<int>(std::lower_bound(b, e, c) - pattern_.col.begin());
  };
  element_blocks_.assign(mesh_.element_count() * 64, -1);
  for (int k = 0; k < m; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const std::size_t e = (static_cast<std::size_t>(k) * n + i) * n + j;
        for (int a = 0; a < 8; ++a) {
          const int ka = k + (a >> 2);
          if (ka == 0) continue;
          const int ra = mesh_.row(i + (a & 1), j + ((a >> 1) & 1), ka);
          for (int b = 0; b < 8; ++b) {
            const int kb = k + (b >> 2);
            if (kb == 0) continue;
            element_blocks_[e * 64 + a * 8 + b] = locate(ra, mesh_.row(i + (b & 1), j + ((b >> 1) & 1), kb));
          }
        }
      }
}

void ElasticSolver::check_profile(const GridProfile& h) const {
  if (!(h.spec() == mesh_.grid) || h.size() != mesh_.grid.size())
    throw std::invalid_argument("elastic solve: profile grid does not match the slab mesh");
  h.require_finite("elastic solve");
  const double lo = h.min();
  if (!(lo > 0.0) || lo < min_height_) {
    std::ostringstream msg;
    msg << "elastic solve: min h = " << lo << " is below the positivity floor " << min_height_;
    throw std::domain_error(msg.str());
  }
}

LinearSystem ElasticSolver::assemble(const GridProfile& h) const {
  check_profile(h);
  const int n = mesh_.grid.n, m = mesh_.layers;
  const double s = mesh_.grid.spacing();
  const Vec6 eps0 = mismatch_voigt(mismatch_);
  LinearSystem sys;
  sys.matrix = pattern_;
  std::fill(sys.matrix.val.begin(), sys.matrix.val.end(), Mat3::Zero());
  sys.rhs.assign(pattern_.rows, Vec3::Zero());

  Mat24 ke;
  Vec24 fe;
  for (int k = 0; k < m; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        element_system(corner_heights(h, i, j), k, m, s, tensor_.voigt(), eps0, ke, fe);
        const std::size_t e = (static_cast<std::size_t>(k) * n + i) * n + j;
        for (int a = 0; a < 8; ++a) {
          const int ka = k + (a >> 2);
          if (ka == 0) continue;
          sys.rhs[mesh_.row(i + (a & 1), j + ((a >> 1) & 1), ka)] += fe.segment<3>(3 * a);
          for (int b = 0; b < 8; ++b) {
            const int pos = element_blocks_[e * 64 + a * 8 + b];
            if (pos >= 0) sys.matrix.val[pos] += ke.block<3, 3>(3 * a, 3 * b);
          }
        }
      }
  return sys;
}

ElasticState ElasticSolver::make_state(const GridProfile& h, std::vector<Vec3> remainder) const {
  check_profile(h);
  const int n = mesh_.grid.n, m = mesh_.layers;
  const double s = mesh_.grid.spacing();
  if (remainder.size() != mesh_.node_count())
    throw std::invalid_argument("elastic state: remainder has the wrong number of nodes");
  ElasticState st;
  st.mesh = mesh_;
  st.tensor = tensor_;
  st.mismatch = mismatch_;
  st.h = h;
  st.remainder = std::move(remainder);
  st.strain.assign(mesh_.element_count(), Mat3::Zero());
  if (mismatch_.is_zero()) {
    st.surface_trace.assign(mesh_.grid.size(), 0.0);
    return st;
  }

  const Vec6 eps0 = mismatch_voigt(mismatch_);
  Field cell_energy(mesh_.element_count());
  std::array<std::array<double, 3>, 8> grad;
  double w;
  for (int k = 0; k < m; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const std::size_t e = (static_cast<std::size_t>(k) * n + i) * n + j;
        const auto hc = corner_heights(h, i, j);
        const auto r = element_remainder(st, i, j, k);
        // Centroid strain: mean of the Gauss-point strains.
        Vec6 avg = Vec6::Zero();
        double energy = 0.0;
        for (int q = 0; q < 8; ++q) {
          shape_gradients(hc, k, m, s, q, grad, w);
          const auto ev = strain_at(grad, r, eps0);
          energy += 0.5 * quad_form(tensor_.voigt(), ev) * w;
          for (int c = 0; c < 6; ++c) avg[c] += ev[c] / 8.0;
        }
        cell_energy[e] = energy;
        st.strain[e] = from_voigt(avg);
      }
  st.energy = grid_sum(cell_energy);
  st.surface_trace = boundary_energy_density(st, h);
  return st;
}

ElasticState ElasticSolver::solve(const GridProfile& h, const ElasticState* warm) const {
  check_profile(h);
  const int rows = pattern_.rows;
  const std::size_t offset = mesh_.grid.size();  // k = 0 nodes are not unknowns
  std::vector<Vec3> x(rows, Vec3::Zero());
  int iterations = 0;
  double rel = 0.0;

  if (!mismatch_.is_zero()) {
    const LinearSystem sys = assemble(h);
    if (warm && warm->mesh == mesh_ && warm->remainder.size() == mesh_.node_count())
      for (int r = 0; r < rows; ++r) x[r] = warm->remainder[offset + r];

    auto dot = [](const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
      Field t(a.size());
      for (std::size_t k = 0; k < a.size(); ++k) t[k] = a[k].dot(b[k]);
      return grid_sum(t);
    };
    std::vector<Vec3> dinv(rows);
    for (int r = 0; r < rows; ++r) {
      const auto b = sys.matrix.col.begin() + sys.matrix.row_ptr[r];
      const int p = static_cast<int>(std::lower_bound(b, sys.matrix.col.begin() + sys.matrix.row_ptr[r + 1], r) -
                                     sys.matrix.col.begin());
      dinv[r] = sys.matrix.val[p].diagonal().cwiseInverse();
    }

    const double bnorm = std::sqrt(dot(sys.rhs, sys.rhs));
    std::vector<Vec3> res(rows), z(rows), p(rows), ap(rows);
    sys.matrix.multiply(x, ap);
    for (int r = 0; r < rows; ++r) res[r] = sys.rhs[r] - ap[r];
    double rnorm = std::sqrt(dot(res, res));
    const int cap = static_cast<int>(std::ceil(options_.cap_factor * std::sqrt(3.0 * rows)));
    const double target = options_.rel_tol * bnorm;
    if (rnorm > target) {
      for (int r = 0; r < rows; ++r) z[r] = dinv[r].cwiseProduct(res[r]);
      p = z;
      double rz = dot(res, z);
      while (rnorm > target) {
        if (iterations >= cap) {
          std::ostringstream msg;
          msg << "elastic solve: conjugate gradients did not converge in " << cap
              << " iterations (relative residual " << rnorm / bnorm << ")";
          throw ElasticSolveError(msg.str(), rnorm / bnorm);
        }
        sys.matrix.multiply(p, ap);
        const double alpha = rz / dot(p, ap);
        for (int r = 0; r < rows; ++r) {
          x[r] += alpha * p[r];
          res[r] -= alpha * ap[r];
        }
        for (int r = 0; r < rows; ++r) z[r] = dinv[r].cwiseProduct(res[r]);
        const double rz_new = dot(res, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (int r = 0; r < rows; ++r) p[r] = z[r] + beta * p[r];
        rnorm = std::sqrt(dot(res, res));
        ++iterations;
      }
    }
    rel = bnorm > 0.0 ? rnorm / bnorm : 0.0;
  }

  std::vector<Vec3> full(mesh_.node_count(), Vec3::Zero());
  for (int r = 0; r < rows; ++r) full[offset + r] = x[r];
  ElasticState st = make_state(h, std::move(full));
  st.cg_iterations = iterations;
  st.relative_residual = rel;
  return st;
}

// ---------------------------------------------------------------------------
// Derived quantities

double frozen_energy(const ElasticState& state, const GridProfile& h_trial) {
  require_same_grid(state, h_trial, "frozen_energy");
  if (!(h_trial.min() > 0.0)) throw std::domain_error("frozen_energy: profile must be positive");
  const int n = state.mesh.grid.n, m = state.mesh.layers;
  const double s = state.mesh.grid.spacing();
  const Vec6 eps0 = mismatch_voigt(state.mismatch);
  Field cell(state.mesh.element_count());
  for (int k = 0; k < m; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        cell[(static_cast<std::size_t>(k) * n + i) * n + j] =
            element_energy(corner_heights(h_trial, i, j), k, m, s, element_remainder(state, i, j, k),
                           state.tensor.voigt(), eps0);
  return grid_sum(cell);
}

Field shape_gradient(const ElasticState& state) { return shape_gradient(state, state.h); }

Field shape_gradient(const ElasticState& state, const GridProfile& h_trial) {
  require_same_grid(state, h_trial, "shape_gradient");
  const int n = state.mesh.grid.n, m = state.mesh.layers;
  const double s = state.mesh.grid.spacing();
  const Vec6 eps0 = mismatch_voigt(state.mismatch);
  const Mat6& C = state.tensor.voigt();
  Field g(state.mesh.grid.size(), 0.0);
  if (state.mismatch.is_zero()) return g;

  // The corner heights enter a Gauss point only through the volume weight
  // w = z3 s^2 / 8 and the mapping coefficients a1 = z1 / (z3 s),
  // a2 = z2 / (z3 s), a3 = 1 / z3. The strain is affine in (a1, a2, a3) with
  // slopes built from v = sum_a dN_a/dxi3 r_a.
  std::array<std::array<double, 3>, 8> grad;
  double w;
  for (int k = 0; k < m; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const auto hc = corner_heights(h_trial, i, j);
        const auto r = element_remainder(state, i, j, k);
        std::array<double, 4> dE{};
        for (int q = 0; q < 8; ++q) {
          const double x1 = kGauss[q & 1], x2 = kGauss[(q >> 1) & 1], x3 = kGauss[(q >> 2) & 1];
          shape_gradients(hc, k, m, s, q, grad, w);
          const std::array<double, 6> e = strain_at(grad, r, eps0);
          Vec6 eps;
          for (int c = 0; c < 6; ++c) eps[c] = e[c];
          const Vec6 sig = C * eps;
          Vec3 v = Vec3::Zero();
          for (int a = 0; a < 8; ++a) {
            const int ax = a & 1, ay = (a >> 1) & 1, az = a >> 2;
            v += (lin(ax, x1) * lin(ay, x2) * dlin(az)) * r[a];
          }
          const double dA1 = -w * (sig[0] * v[0] + sig[4] * v[2] + sig[5] * v[1]);
          const double dA2 = -w * (sig[1] * v[1] + sig[3] * v[2] + sig[5] * v[0]);
          const double dA3 = w * (sig[2] * v[2] + sig[3] * v[1] + sig[4] * v[0]);
          const double density = 0.5 * eps.dot(sig);

          double hb = 0.0, hb1 = 0.0, hb2 = 0.0;
          for (int c = 0; c < 4; ++c) {
            const int cx = c & 1, cy = c >> 1;
            hb += hc[c] * lin(cx, x1) * lin(cy, x2);
            hb1 += hc[c] * dlin(cx) * lin(cy, x2);
            hb2 += hc[c] * lin(cx, x1) * dlin(cy);
          }
          const double frac = (k + x3) / m;
          const double z1 = hb1 * frac, z2 = hb2 * frac, z3 = hb / m;
          for (int c = 0; c < 4; ++c) {
            const int cx = c & 1, cy = c >> 1;
            const double dz3 = lin(cx, x1) * lin(cy, x2) / m;
            const double dz1 = dlin(cx) * lin(cy, x2) * frac, dz2 = lin(cx, x1) * dlin(cy) * frac;
            const double da1 = (dz1 * z3 - z1 * dz3) / (z3 * z3 * s);
            const double da2 = (dz2 * z3 - z2 * dz3) / (z3 * z3 * s);
            const double da3 = -dz3 / (z3 * z3);
            dE[c] += density * dz3 * (s * s / 8.0) + dA1 * da1 + dA2 * da2 + dA3 * da3;
          }
        }
        g[h_trial.index(i, j)] += dE[0];
        g[h_trial.index(i + 1, j)] += dE[1];
        g[h_trial.index(i, j + 1)] += dE[2];
        g[h_trial.index(i + 1, j + 1)] += dE[3];
      }
  const double inv = 1.0 / (s * s);
  for (double& v : g) v *= inv;
  return g;
}

Field boundary_energy_density(const ElasticState& state, const GridProfile& h) {
  require_same_grid(state, h, "boundary_energy_density");
  if (state.remainder.size() != state.mesh.node_count())
    throw std::invalid_argument("boundary_energy_density: state is not solved on this mesh");
  const int n = state.mesh.grid.n, m = state.mesh.layers;
  const double s = state.mesh.grid.spacing();
  const Vec6 eps0 = mismatch_voigt(state.mismatch);
  Field trace(state.mesh.grid.size(), 0.0);
  if (state.mismatch.is_zero()) return trace;

  // 1D Lagrange extrapolation from the two Gauss points to the endpoint 1.
  const double far = (1.0 - kGauss[1]) / (kGauss[0] - kGauss[1]);
  const double near = (1.0 - kGauss[0]) / (kGauss[1] - kGauss[0]);
  const double wq[2] = {far, near};
  auto corner_weight = [&](int q, int a) {
    // weight of Gauss point q for the top corner a = cx + 2 cy
    const int qx = q & 1, qy = (q >> 1) & 1, qz = q >> 2;
    const double w1 = (a & 1) == qx ? wq[1] : wq[0];
    const double w2 = ((a >> 1) & 1) == qy ? wq[1] : wq[0];
    return w1 * w2 * wq[qz];
  };

  std::array<std::array<double, 3>, 8> grad;
  double w;
  const int k = m - 1;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const auto hc = corner_heights(h, i, j);
      const auto r = element_remainder(state, i, j, k);
      std::array<double, 8> wg;
      for (int q = 0; q < 8; ++q) {
        shape_gradients(hc, k, m, s, q, grad, w);
        wg[q] = 0.5 * quad_form(state.tensor.voigt(), strain_at(grad, r, eps0));
      }
      for (int a = 0; a < 4; ++a) {
        double v = 0.0;
        for (int q = 0; q < 8; ++q) v += corner_weight(q, a) * wg[q];
        trace[h.index(i + (a & 1), j + (a >> 1))] += 0.25 * v;
      }
    }
  return trace;
}

FlatSolution flat_solution(const ElasticTensor& tensor, const Mismatch& mismatch) {
  // Unknown c enters the engineering strain as (.., c3, c2, c1, 0); the
  // traction (C E) e3 is the Voigt stress rows (xz, yz, zz) = (4, 3, 2).
  const Mat6& c = tensor.voigt();
  const int rows[3] = {4, 3, 2};
  const int cols[3] = {4, 3, 2};
  Mat3 a;
  Vec3 rhs;
  for (int r = 0; r < 3; ++r) {
    for (int u = 0; u < 3; ++u) a(r, u) = c(rows[r], cols[u]);
    rhs[r] = -c(rows[r], 0) * mismatch.e1 - c(rows[r], 1) * mismatch.e2;
  }
  FlatSolution sol;
  sol.vertical_gradient = a.partialPivLu().solve(rhs);
  Vec6 v;
  v << mismatch.e1, mismatch.e2, sol.vertical_gradient[2], sol.vertical_gradient[1], sol.vertical_gradient[0], 0.0;
  sol.strain = from_voigt(v);
  sol.density = tensor.energy_density(sol.strain);
  return sol;
}

ElasticState flat_equilibrium(double d, const SlabMesh& mesh, const ElasticTensor& tensor, const Mismatch& mismatch) {
  if (!(d > 0.0) || !std::isfinite(d)) throw std::invalid_argument("flat_equilibrium: height must be positive");
  mesh.validate();
  const FlatSolution sol = flat_solution(tensor, mismatch);
  ElasticState st;
  st.mesh = mesh;
  st.tensor = tensor;
  st.mismatch = mismatch;
  st.h = GridProfile(mesh.grid, d);
  const int n = mesh.grid.n;
  st.remainder.resize(mesh.node_count());
  for (int k = 0; k <= mesh.layers; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) st.remainder[st.node_index(i, j, k)] = sol.vertical_gradient * (d * k / mesh.layers);
  st.strain.assign(mesh.element_count(), sol.strain);
  const double ell = mesh.grid.ell;
  st.energy = sol.density * ell * ell * d;
  st.surface_trace.assign(mesh.grid.size(), sol.density);
  return st;
}

void write_elastic_state(std::ostream& os, const ElasticState& state) {
  const int n = state.mesh.grid.n;
  const char* names[3] = {"u1", "u2", "u3"};
  for (int k = 0; k <= state.mesh.layers; ++k)
    for (int c = 0; c < 3; ++c) {
      Field f(state.mesh.grid.size());
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) f[static_cast<std::size_t>(i) * n + j] = state.displacement(i, j, k)[c];
      os << "# displacement " << names[c] << " layer " << k << '\n';
      write_grid_text(os, state.mesh.grid, f);
    }
  for (int k = 0; k < state.mesh.layers; ++k) {
    Field f(state.mesh.grid.size());
    for (std::size_t p = 0; p < f.size(); ++p)
      f[p] = state.tensor.energy_density(state.strain[static_cast<std::size_t>(k) * f.size() + p]);
    os << "# energy_density cell_layer " << k << '\n';
    write_grid_text(os, state.mesh.grid, f);
  }
  os << "total_energy " << std::setprecision(17) << state.energy << '\n';
}

}  // namespace filmflow
