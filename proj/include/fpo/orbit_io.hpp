#pragma once
// Orbit files: JSON-shaped structured text with full double precision
// (numbers written with 17 significant digits, read back bit-exactly).

#include <optional>
#include <string>
#include <vector>

#include "fpo/functionals.hpp"
#include "fpo/solvers.hpp"

namespace fpo {

struct OrbitFile {
  int schema_version = 1;
  int n = 0;
  std::string model;  // "kepler" | "av" | "in" | "interp"
  double r = 0.0;
  double N = 2.0;
  std::vector<double> z1, z2;
  std::string class1, class2;
  // Provenance block.
  SolveOptions options;
  std::vector<double> continuation_schedule;  // accepted r values, if any
  double gradient_norm = 0.0;

  ZPair to_pair() const;
  static OrbitFile from_pair(const ZPair& p, const std::string& model, double r, double N);
};

std::string orbit_to_json(const OrbitFile& f);
OrbitFile orbit_from_json(const std::string& text);
void save_orbit(const OrbitFile& f, const std::string& path);
OrbitFile load_orbit(const std::string& path);

// Model string -> blend parameter r (kepler handled by the caller).
double model_to_r(const std::string& model, double flag_r);

}  // namespace fpo
