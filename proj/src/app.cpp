#include "filmflow/app.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "filmflow/geometry.hpp"

namespace filmflow {

namespace fs = std::filesystem;

void write_trace_csv_header(std::ostream& os) {
  os << "step,time,elastic,surface_aniso,surface_reg,penalization,total,el_residual,outer_iterations,min_h,"
        "lipschitz,constraint_active,tau\n";
}

void write_trace_csv_row(std::ostream& os, const TraceRecord& r) {
  const auto old = os.precision(17);
  os << r.step << ',' << r.time << ',' << r.energy.elastic << ',' << r.energy.surface_aniso << ','
     << r.energy.surface_reg << ',' << r.energy.penalization << ',' << r.energy.total << ',' << r.el_residual << ','
     << r.outer_iterations << ',' << r.min_h << ',' << r.lipschitz << ',' << (r.constraint_active ? 1 : 0) << ','
     << r.tau << '\n';
  os.precision(old);
}

namespace {

std::ofstream open_output(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  return f;
}

ElasticSolver solver_of(const RunConfig& cfg) {
  return ElasticSolver(mesh_of(cfg), tensor_of(cfg), mismatch_of(cfg), solver_options_of(cfg));
}

}  // namespace

int command_simulate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  open_output(dir / "config.txt") << serialize(cfg);

  const ElasticSolver solver = solver_of(cfg);
  std::ofstream csv = open_output(dir / "trace.csv");
  write_trace_csv_header(csv);
  auto observer = [&](const TraceRecord& r, const StepRecord* step) {
    write_trace_csv_row(csv, r);
    if (cfg.dump_every > 0 && r.step % cfg.dump_every == 0) {
      std::ostringstream tag;
      tag << std::setw(6) << std::setfill('0') << r.step << ".txt";
      write_profile_file((dir / ("profile_" + tag.str())).string(), r.h);
      if (!solver.mismatch().is_zero()) {
        std::ofstream f = open_output(dir / ("elastic_" + tag.str()));
        write_elastic_state(f, step ? step->state : solver.solve(r.h));
      }
    }
  };
  const EvolutionTrace trace =
      run(initial_profile_of(cfg), anisotropy_of(cfg), solver, evolution_params_of(cfg), step_params_of(cfg), observer);
  csv.close();

  const HolderReport holder = holder_time_diagnostic(trace, cfg.p);
  std::ostringstream sum;
  sum.precision(17);
  sum << "steps = " << trace.records.size() - 1 << '\n'
      << "final_time = " << trace.last_time() << '\n'
      << "empirical_T0 = " << trace.empirical_T0 << '\n'
      << "completed = " << (trace.completed ? "true" : "false") << '\n'
      << "safeguard_stop = " << (trace.safeguard_stop ? "true" : "false") << '\n'
      << "C0 = " << trace.c0 << '\n'
      << "initial_energy = " << trace.initial_energy << '\n'
      << "final_energy = " << trace.records.back().energy.total << '\n'
      << "energy_monotone = " << (trace.monotone ? "true" : "false") << '\n'
      << "dissipation = " << trace.dissipation << '\n'
      << "dissipation_bound = " << trace.dissipation_constant() * trace.initial_energy << '\n'
      << "dissipation_bound_holds = " << (trace.dissipation_bound_holds() ? "true" : "false") << '\n'
      << "curvature_regularity = " << trace.curvature_regularity << '\n'
      << "holder_constant = " << holder.constant << '\n'
      << "holder_exponent = " << holder.exponent << '\n';
  if (!trace.stop_reason.empty()) sum << "stop_reason = " << trace.stop_reason << '\n';
  open_output(dir / "summary.txt") << sum.str();
  out << sum.str();

  if (!trace.monotone || (!trace.completed && !trace.safeguard_stop)) {
    err << "simulate: run aborted: " << trace.stop_reason << '\n';
    return exit_runtime;
  }
  return exit_ok;
}

int command_stability(const RunConfig& cfg, int jobs, std::ostream& out, std::ostream&) {
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  open_output(dir / "config.txt") << serialize(cfg);
  const ElasticSolver solver = solver_of(cfg);
  const StabilityProblem problem = stability_problem_of(cfg, jobs);
  const StabilityReport rep = cfg.experiment == "stability-lyapunov" ? lyapunov_experiment(problem, solver)
                                                                     : asymptotic_experiment(problem, solver);
  {
    std::ofstream f = open_output(dir / "report.txt");
    write_stability_report(f, rep);
  }
  {
    std::ofstream f = open_output(dir / "spectrum.csv");
    write_spectrum_csv(f, rep);
  }
  {
    std::ofstream f = open_output(dir / "distance.csv");
    write_distance_csv(f, rep);
  }
  write_stability_report(out, rep);
  return exit_ok;
}

int command_energy(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const GridProfile h = initial_profile_of(cfg);
  const ElasticState st = solver_of(cfg).solve(h);
  write_energy_csv_header(out);
  write_energy_csv_row(out, 0, 0.0, total_energy(h, st, anisotropy_of(cfg), regularization_of(cfg)));
  return exit_ok;
}

namespace {

GridProfile random_profile(const GridSpec& spec, std::mt19937_64& rng, double d, double amp) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  struct Term {
    int a, b;
    double c, ph;
  };
  std::vector<Term> terms;
  for (int q = 0; q < 4; ++q)
    terms.push_back({static_cast<int>(rng() % 3) + 1, static_cast<int>(rng() % 5) - 2, amp * u(rng), 3.0 * u(rng)});
  const double w = 2.0 * std::numbers::pi / spec.ell;
  return sample(spec, [&](double x1, double x2) {
    double v = d;
    for (const Term& t : terms) v += t.c * std::cos(w * (t.a * x1 + t.b * x2) + t.ph);
    return v;
  });
}

Field random_field(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Field f(n);
  for (double& v : f) v = g(rng);
  return f;
}

CheckResult check(const std::string& name, bool pass, double value, double bound) {
  std::ostringstream os;
  os << std::setprecision(3) << value << " (bound " << bound << ")";
  return {name, pass, os.str()};
}

}  // namespace

std::vector<CheckResult> run_checks(const RunConfig& cfg) {
  std::vector<CheckResult> out;
  std::mt19937_64 rng(20240607);
  const Anisotropy psi = anisotropy_of(cfg);
  const ElasticTensor tensor = tensor_of(cfg);
  Mismatch e = mismatch_of(cfg);
  if (e.is_zero()) e = {0.01, 0.01};
  const double d = 0.1 * cfg.ell;

  {  // zero-mean curvature
    double worst = 0.0;
    for (int n : {16, 32})
      for (int t = 0; t < 10; ++t) {
        const GridProfile h = random_profile({cfg.ell, n}, rng, d, 0.02 * cfg.ell);
        worst = std::max(worst, std::abs(grid_sum(kinematics(h).curv)) / h.size());
      }
    out.push_back(check("geometry: grid mean of H vanishes", worst <= 1e-12, worst, 1e-12));
  }
  {  // eigenvalue sum vs expanded trace
    double worst = 0.0;
    const GridProfile h = random_profile({cfg.ell, 32}, rng, d, 0.02 * cfg.ell);
    const SurfaceGeometry g = differentiate(h);
    for (std::size_t k = 0; k < h.size(); ++k)
      worst = std::max(worst, std::abs(g.principal_sum[k] - g.shape_trace[k]) / std::max(1.0, std::abs(g.shape_trace[k])));
    out.push_back(check("geometry: k1 + k2 equals the trace of the shape operator", worst <= 1e-10, worst, 1e-10));
  }
  {  // Euler relation and homogeneity
    double worst = 0.0;
    for (const Vec3& xi : sphere_samples(200)) {
      const double v = psi.value(xi);
      worst = std::max(worst, std::abs(psi.gradient(xi).dot(xi) - v) / v);
      worst = std::max(worst, std::abs(psi.value(2.5 * xi) - 2.5 * v) / v);
      worst = std::max(worst, (psi.hessian(xi) * xi).norm() / v);
    }
    out.push_back(check("anisotropy: Euler relation and one-homogeneity", worst <= 1e-10, worst, 1e-10));
  }
  {  // gradient vs finite differences
    double worst = 0.0;
    const double hstep = 1e-6;
    for (const Vec3& xi : sphere_samples(200)) {
      const Vec3 g = psi.gradient(xi);
      for (int c = 0; c < 3; ++c) {
        Vec3 a = xi, b = xi;
        a[c] += hstep;
        b[c] -= hstep;
        worst = std::max(worst, std::abs((psi.value(a) - psi.value(b)) / (2 * hstep) - g[c]) / std::max(1.0, g.norm()));
      }
    }
    out.push_back(check("anisotropy: gradient matches finite differences", worst <= 1e-6, worst, 1e-6));
  }
  {  // coercivity
    double worst = std::numeric_limits<double>::infinity();
    std::normal_distribution<double> g;
    const double k = tensor.coercivity();
    for (int t = 0; t < 1000; ++t) {
      Mat3 m;
      for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = g(rng);
      m = 0.5 * (m + m.transpose()).eval();
      worst = std::min(worst, tensor.contract(m, m) - 2.0 * k * (m.array() * m.array()).sum() * (1 - 1e-12));
    }
    out.push_back(check("elasticity: C M : M >= 2k M : M", worst >= 0.0, worst, 0.0));
  }
  {  // patch test
    const SlabMesh mesh{{cfg.ell, 8}, 4};
    const ElasticSolver solver(mesh, tensor, e);
    const ElasticState fem = solver.solve(GridProfile(mesh.grid, d));
    const ElasticState exact = flat_equilibrium(d, mesh, tensor, e);
    double worst = 0.0;
    for (std::size_t k = 0; k < fem.remainder.size(); ++k)
      worst = std::max(worst, (fem.remainder[k] - exact.remainder[k]).cwiseAbs().maxCoeff());
    out.push_back(check("elasticity: flat film reproduces the affine equilibrium", worst <= 1e-9, worst, 1e-9));
  }
  {  // CG vs dense direct solve
    const SlabMesh mesh{{cfg.ell, 8}, 4};
    const ElasticSolver solver(mesh, tensor, e);
    const GridProfile h = random_profile(mesh.grid, rng, d, 0.01 * cfg.ell);
    const ElasticState cg = solver.solve(h);
    const LinearSystem sys = solver.assemble(h);
    Eigen::VectorXd b(3 * sys.matrix.rows);
    for (int r = 0; r < sys.matrix.rows; ++r) b.segment<3>(3 * r) = sys.rhs[r];
    const Eigen::VectorXd x = sys.matrix.dense().llt().solve(b);
    std::vector<Vec3> full(mesh.node_count(), Vec3::Zero());
    for (int r = 0; r < sys.matrix.rows; ++r) full[mesh.grid.size() + r] = x.segment<3>(3 * r);
    const ElasticState direct = solver.make_state(h, full);
    const double rel = std::abs(cg.energy - direct.energy) / direct.energy;
    out.push_back(check("elasticity: conjugate gradients match a dense direct solve", rel <= 1e-8, rel, 1e-8));
  }
  RegularizationParams reg = regularization_of(cfg);
  reg.tau = 1e-3;
  {  // duality and gradient consistency with elasticity
    const SlabMesh mesh{{cfg.ell, 16}, 4};
    const ElasticSolver solver(mesh, tensor, e);
    const GridProfile hp = random_profile(mesh.grid, rng, d, 0.01 * cfg.ell);
    GridProfile h = hp;
    {
      const Field f = random_field(h.size(), rng);
      for (std::size_t k = 0; k < h.size(); ++k) h[k] += 1e-4 * cfg.ell * f[k];
    }
    const ElasticState st = solver.solve(h);
    const Field g = first_variation(h, st, &hp, psi, reg);
    double dual = 0.0, grad = 0.0;
    for (int t = 0; t < 3; ++t) {
      const Field phi = random_field(h.size(), rng);
      const double lhs = l2_dot(g, phi, mesh.grid);
      const double rhs = el_pairing(h, st, &hp, psi, reg, phi);
      const double scale = l2_norm(g, mesh.grid) * l2_norm(phi, mesh.grid);
      dual = std::max(dual, std::abs(lhs - rhs) / scale);
      const double s = 1e-6;
      auto G = [&](double sgn) {
        GridProfile x = h;
        for (std::size_t k = 0; k < x.size(); ++k) x[k] += sgn * s * phi[k];
        return frozen_energy(st, x) + surface_energy(x, psi, reg).total + penalization(x, hp, reg.tau);
      };
      const double fd = (G(1.0) - G(-1.0)) / (2 * s);
      grad = std::max(grad, std::abs(fd - lhs) / std::max(std::abs(lhs), 1e-3 * scale));
    }
    out.push_back(check("energy: adjoint first variation equals the term-by-term pairing", dual <= 1e-13, dual, 1e-13));
    out.push_back(check("energy: first variation matches central differences", grad <= 1e-5, grad, 1e-5));
  }
  {  // penalization gradient
    const GridSpec spec{cfg.ell, 16};
    const GridProfile hp = random_profile(spec, rng, d, 0.01 * cfg.ell);
    const GridProfile h = random_profile(spec, rng, d, 0.01 * cfg.ell);
    const Field phi = random_field(h.size(), rng);
    const SlabMesh mesh{spec, 4};
    const ElasticState st = ElasticSolver(mesh, tensor, Mismatch{}).solve(h);
    const Field v = first_variation_terms(h, st, &hp, psi, reg).velocity;
    const double s = 1e-6;
    GridProfile a = h, b = h;
    for (std::size_t k = 0; k < h.size(); ++k) {
      a[k] += s * phi[k];
      b[k] -= s * phi[k];
    }
    const double fd = (penalization(a, hp, reg.tau) - penalization(b, hp, reg.tau)) / (2 * s);
    const double an = l2_dot(v, phi, spec);
    const double rel = std::abs(fd - an) / std::abs(an);
    out.push_back(check("energy: penalization gradient", rel <= 1e-7, rel, 1e-7));
  }
  {  // configuration round trip
    const bool same = parse_config(serialize(cfg)) == cfg;
    out.push_back({"io: configuration round trip", same, same ? "identical" : "differs"});
  }
  return out;
}

int command_check(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  bool all = true;
  for (const CheckResult& r : run_checks(cfg)) {
    out << (r.pass ? "PASS " : "FAIL ") << r.name << "  " << r.detail << '\n';
    all = all && r.pass;
  }
  out << (all ? "all checks passed" : "some checks failed") << '\n';
  return all ? exit_ok : exit_runtime;
}

}  // namespace filmflow
