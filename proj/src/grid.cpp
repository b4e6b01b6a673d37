#include "filmflow/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace filmflow {

void GridSpec::validate() const {
  if (!(ell > 0.0) || !std::isfinite(ell))
    throw std::invalid_argument("grid: ell must be positive, got " + std::to_string(ell));
  if (n < 8) throw std::invalid_argument("grid: n must be >= 8, got " + std::to_string(n));
}

GridProfile::GridProfile(GridSpec spec, double value) : spec_(spec), values_(spec.size(), value) {
  spec_.validate();
}

GridProfile::GridProfile(GridSpec spec, Field values) : spec_(spec), values_(std::move(values)) {
  spec_.validate();
  if (values_.size() != spec_.size())
    throw std::invalid_argument("profile: value count does not match n*n");
}

double GridProfile::min() const { return *std::min_element(values_.begin(), values_.end()); }
double GridProfile::max() const { return *std::max_element(values_.begin(), values_.end()); }
double GridProfile::mean() const {
  return std::accumulate(values_.begin(), values_.end(), 0.0) / static_cast<double>(values_.size());
}

void GridProfile::require_finite(const char* what) const {
  for (int i = 0; i < spec_.n; ++i)
    for (int j = 0; j < spec_.n; ++j)
      if (!std::isfinite((*this)(i, j))) {
        std::ostringstream msg;
        msg << what << ": non-finite value at (" << i << ", " << j << ")";
        throw std::invalid_argument(msg.str());
      }
}

void write_grid_text(std::ostream& os, const GridSpec& spec, const Field& values) {
  if (values.size() != spec.size()) throw std::invalid_argument("grid dump: size mismatch");
  os << std::setprecision(17) << spec.ell << ' ' << spec.n << '\n';
  for (int i = 0; i < spec.n; ++i) {
    for (int j = 0; j < spec.n; ++j) {
      if (j) os << ' ';
      os << values[static_cast<std::size_t>(i) * spec.n + j];
    }
    os << '\n';
  }
}

void write_profile(std::ostream& os, const GridProfile& h) { write_grid_text(os, h.spec(), h.values()); }

GridProfile read_profile(std::istream& is) {
  GridSpec spec;
  if (!(is >> spec.ell >> spec.n)) throw std::runtime_error("profile: missing 'ell n' header");
  spec.validate();
  Field values(spec.size());
  for (std::size_t k = 0; k < values.size(); ++k)
    if (!(is >> values[k]))
      throw std::runtime_error("profile: expected " + std::to_string(values.size()) + " values, got " +
                               std::to_string(k));
  GridProfile h(spec, std::move(values));
  h.require_finite();
  return h;
}

GridProfile read_profile_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open profile file '" + path + "'");
  return read_profile(in);
}

void write_profile_file(const std::string& path, const GridProfile& h) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_profile(out, h);
}

}  // namespace filmflow
