#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace filmflow {

/// Uniform periodic sampling of the square Q = (0, ell)^2.
struct GridSpec {
  double ell = 1.0;
  int n = 32;

  double spacing() const { return ell / n; }
  std::size_t size() const { return static_cast<std::size_t>(n) * n; }
  /// Area weight of one grid cell (midpoint quadrature).
  double cell_area() const { return spacing() * spacing(); }

  /// Throws std::invalid_argument unless ell > 0 and n >= 8.
  void validate() const;

  bool operator==(const GridSpec&) const = default;
};

inline int wrap(int i, int n) {
  int r = i % n;
  return r < 0 ? r + n : r;
}

/// Flat row-major storage of a scalar field on the grid; index = i*n + j,
/// i along x1 and j along x2.
using Field = std::vector<double>;

/// Sampled film height h over Q with periodic extension.
class GridProfile {
 public:
  GridProfile() = default;
  explicit GridProfile(GridSpec spec, double value = 0.0);
  GridProfile(GridSpec spec, Field values);

  const GridSpec& spec() const { return spec_; }
  int n() const { return spec_.n; }
  std::size_t size() const { return values_.size(); }

  /// Periodic access; indices wrap modulo n in both axes.
  double operator()(int i, int j) const { return values_[index(i, j)]; }
  double& operator()(int i, int j) { return values_[index(i, j)]; }

  double operator[](std::size_t k) const { return values_[k]; }
  double& operator[](std::size_t k) { return values_[k]; }

  const Field& values() const { return values_; }
  Field& values() { return values_; }

  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(wrap(i, spec_.n)) * spec_.n + wrap(j, spec_.n);
  }
  /// Node coordinates (x1, x2) of grid index (i, j).
  double x1(int i) const { return i * spec_.spacing(); }
  double x2(int j) const { return j * spec_.spacing(); }

  double min() const;
  double max() const;
  double mean() const;
  /// Throws with the offending location if any value is NaN or infinite.
  void require_finite(const char* what = "profile") const;

 private:
  GridSpec spec_;
  Field values_;
};

/// Build a profile by sampling f(x1, x2) at the grid nodes.
template <class F>
GridProfile sample(const GridSpec& spec, F&& f) {
  GridProfile h(spec);
  for (int i = 0; i < spec.n; ++i)
    for (int j = 0; j < spec.n; ++j) h(i, j) = f(h.x1(i), h.x2(j));
  return h;
}

// Structured-grid text format: a header line "ell n" followed by n rows of n
// whitespace-separated values (row i holds x1 = i*spacing), 17 significant
// digits.
void write_grid_text(std::ostream& os, const GridSpec& spec, const Field& values);
void write_profile(std::ostream& os, const GridProfile& h);
GridProfile read_profile(std::istream& is);
GridProfile read_profile_file(const std::string& path);
void write_profile_file(const std::string& path, const GridProfile& h);

}  // namespace filmflow
