#include "fpo/orbit_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "fpo/grid.hpp"

namespace fpo {
namespace {

// Shortest decimal that round-trips a double; %.17g is always sufficient and
// the reader parses it back bit-exactly.
std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_array(std::ostream& os, const char* key, const std::vector<double>& v,
                 const char* indent) {
  os << indent << '"' << key << "\": [";
  for (size_t i = 0; i < v.size(); ++i) {
    if (i % 4 == 0) os << "\n" << indent << "  ";
    os << num(v[i]);
    if (i + 1 < v.size()) os << ", ";
  }
  os << "\n" << indent << "]";
}

void require(bool cond, const char* what) {
  if (!cond) throw std::runtime_error(std::string("orbit file: ") + what);
}

std::vector<double> finite_array(const nlohmann::json& j, const char* key, int n) {
  require(j.contains(key) && j[key].is_array(), "missing sample array");
  std::vector<double> v = j[key].get<std::vector<double>>();
  require(static_cast<int>(v.size()) == n, "sample array length differs from n");
  for (double x : v) require(std::isfinite(x), "non-finite sample");
  return v;
}

}  // namespace

ZPair OrbitFile::to_pair() const {
  LoopGrid g = LoopGrid::make(n);
  ZPair p{ZLoop::zeros(g, symmetry_class_from_string(class1)),
          ZLoop::zeros(g, symmetry_class_from_string(class2))};
  p.z1.v = z1;
  p.z2.v = z2;
  return p;
}

OrbitFile OrbitFile::from_pair(const ZPair& p, const std::string& model, double r,
                               double N) {
  OrbitFile f;
  f.n = p.z1.n();
  f.model = model;
  f.r = r;
  f.N = N;
  f.z1 = p.z1.v;
  f.z2 = p.z2.v;
  f.class1 = to_string(p.z1.cls);
  f.class2 = to_string(p.z2.cls);
  return f;
}

std::string orbit_to_json(const OrbitFile& f) {
  std::ostringstream os;
  os << "{\n";
  os << "  \"schema_version\": " << f.schema_version << ",\n";
  os << "  \"n\": " << f.n << ",\n";
  os << "  \"model\": \"" << f.model << "\",\n";
  os << "  \"r\": " << num(f.r) << ",\n";
  os << "  \"N\": " << num(f.N) << ",\n";
  os << "  \"class1\": \"" << f.class1 << "\",\n";
  os << "  \"class2\": \"" << f.class2 << "\",\n";
  write_array(os, "z1", f.z1, "  ");
  os << ",\n";
  write_array(os, "z2", f.z2, "  ");
  os << ",\n";
  os << "  \"provenance\": {\n";
  os << "    \"options\": {\n";
  os << "      \"grad_tol\": " << num(f.options.grad_tol) << ",\n";
  os << "      \"max_iter\": " << f.options.max_iter << ",\n";
  os << "      \"damping\": " << num(f.options.damping) << ",\n";
  os << "      \"fd_step\": " << num(f.options.fd_step) << "\n";
  os << "    },\n";
  write_array(os, "continuation_schedule", f.continuation_schedule, "    ");
  os << ",\n";
  os << "    \"gradient_norm\": " << num(f.gradient_norm) << "\n";
  os << "  }\n";
  os << "}\n";
  return os.str();
}

OrbitFile orbit_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("orbit file: ") + e.what());
  }
  try {
    OrbitFile f;
    require(j.is_object(), "top level is not an object");
    f.schema_version = j.at("schema_version").get<int>();
    require(f.schema_version == 1, "unsupported schema version");
    f.n = j.at("n").get<int>();
    require(f.n >= 8 && f.n % 4 == 0, "invalid grid size");
    f.model = j.at("model").get<std::string>();
    require(f.model == "kepler" || f.model == "av" || f.model == "in" ||
                f.model == "interp",
            "unknown model");
    f.r = j.at("r").get<double>();
    f.N = j.at("N").get<double>();
    require(std::isfinite(f.r) && std::isfinite(f.N) && f.N > 1.0,
            "invalid parameters");
    f.class1 = j.at("class1").get<std::string>();
    f.class2 = j.at("class2").get<std::string>();
    symmetry_class_from_string(f.class1);  // throws on unknown names
    symmetry_class_from_string(f.class2);
    f.z1 = finite_array(j, "z1", f.n);
    f.z2 = finite_array(j, "z2", f.n);
    const nlohmann::json& prov = j.at("provenance");
    const nlohmann::json& op = prov.at("options");
    f.options.grad_tol = op.at("grad_tol").get<double>();
    f.options.max_iter = op.at("max_iter").get<int>();
    f.options.damping = op.at("damping").get<double>();
    f.options.fd_step = op.at("fd_step").get<double>();
    f.continuation_schedule =
        prov.at("continuation_schedule").get<std::vector<double>>();
    f.gradient_norm = prov.at("gradient_norm").get<double>();
    require(std::isfinite(f.gradient_norm), "non-finite gradient norm");
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("orbit file: ") + e.what());
  }
}

void save_orbit(const OrbitFile& f, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << orbit_to_json(f);
  if (!os) throw std::runtime_error("write failed: " + path);
}

OrbitFile load_orbit(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return orbit_from_json(buf.str());
}

double model_to_r(const std::string& model, double flag_r) {
  if (model == "av") return 0.0;
  if (model == "in") return 1.0;
  if (model == "interp") return flag_r;
  throw std::invalid_argument("model has no blend parameter: " + model);
}

}  // namespace fpo
