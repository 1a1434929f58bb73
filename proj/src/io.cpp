#include "scenario_ddc/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "scenario_ddc/error.hpp"

namespace scenario_ddc::io {

namespace {

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(where + ": missing field '" + key + "'");
  return j.at(key);
}

int require_int(const json& j, const char* key, const std::string& where, int min_value) {
  const json& v = require(j, key, where);
  if (!v.is_number_integer()) throw ValidationError(where + ": field '" + key + "' must be an integer");
  const auto x = v.get<long long>();
  if (x < min_value) throw ValidationError(where + ": field '" + key + "' must be >= " + std::to_string(min_value));
  return static_cast<int>(x);
}

double require_number(const json& j, const char* key, const std::string& where) {
  const json& v = require(j, key, where);
  if (!v.is_number()) throw ValidationError(where + ": field '" + key + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ValidationError(where + ": field '" + key + "' must be finite");
  return x;
}

// Sequence of equally sized vectors -> dim x count matrix.
MatrixXd columns_from_json(const json& j, int dim, const std::string& where) {
  if (!j.is_array()) throw ValidationError(where + " must be an array of vectors");
  MatrixXd m(dim, static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    const json& v = j[k];
    if (!v.is_array() || static_cast<int>(v.size()) != dim)
      throw ValidationError(where + "[" + std::to_string(k) + "] must have " + std::to_string(dim) + " entries");
    for (int i = 0; i < dim; ++i) {
      if (!v[i].is_number()) throw ValidationError(where + "[" + std::to_string(k) + "] has a non-numeric entry");
      m(i, static_cast<Eigen::Index>(k)) = v[i].get<double>();
    }
  }
  return m;
}

json columns_to_json(const MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index k = 0; k < m.cols(); ++k) {
    json v = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) v.push_back(m(i, k));
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace

Dataset make_dataset(const GeneratedDataset& g, int nominal_M) {
  Dataset ds;
  ds.nx = g.nx;
  ds.nu = g.nu;
  ds.M = nominal_M;
  ds.trajectories = g.trajectories;
  return ds;
}

json dataset_to_json(const Dataset& ds) {
  json j;
  j["nx"] = ds.nx;
  j["nu"] = ds.nu;
  j["M"] = ds.M;
  json trajs = json::array();
  for (const auto& t : ds.trajectories) {
    json tj;
    tj["system_id"] = t.system_id;
    tj["seed"] = t.seed ? json(*t.seed) : json(nullptr);
    tj["states"] = columns_to_json(t.states);
    tj["inputs"] = columns_to_json(t.inputs);
    trajs.push_back(std::move(tj));
  }
  j["trajectories"] = std::move(trajs);
  return j;
}

Dataset dataset_from_json(const json& j) {
  const std::string where = "dataset";
  if (!j.is_object()) throw ValidationError("dataset: top level must be an object");
  Dataset ds;
  ds.nx = require_int(j, "nx", where, 1);
  ds.nu = require_int(j, "nu", where, 1);
  ds.M = require_int(j, "M", where, 1);
  const json& trajs = require(j, "trajectories", where);
  if (!trajs.is_array() || trajs.empty()) throw ValidationError("dataset: 'trajectories' must be a nonempty array");
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    const std::string tw = "dataset.trajectories[" + std::to_string(i) + "]";
    const json& tj = trajs[i];
    Trajectory t;
    if (tj.contains("system_id")) {
      if (!tj["system_id"].is_string()) throw ValidationError(tw + ".system_id must be a string");
      t.system_id = tj["system_id"].get<std::string>();
    }
    if (tj.contains("seed") && !tj["seed"].is_null()) {
      if (!tj["seed"].is_number_unsigned() && !(tj["seed"].is_number_integer() && tj["seed"].get<long long>() >= 0))
        throw ValidationError(tw + ".seed must be a nonnegative integer");
      t.seed = tj["seed"].get<std::uint64_t>();
    }
    t.states = columns_from_json(require(tj, "states", tw), ds.nx, tw + ".states");
    t.inputs = columns_from_json(require(tj, "inputs", tw), ds.nu, tw + ".inputs");
    if (t.states.cols() > ds.M + 1)
      throw ValidationError(tw + " has more than M+1 = " + std::to_string(ds.M + 1) + " states");
    try {
      t.validate();
    } catch (const ValidationError& e) {
      throw ValidationError(tw + ": " + e.what());
    }
    ds.trajectories.push_back(std::move(t));
  }
  return ds;
}

json ground_truth_to_json(const GeneratedDataset& g) {
  json j;
  j["nx"] = g.nx;
  j["nu"] = g.nu;
  json systems = json::array();
  for (std::size_t i = 0; i < g.systems.size(); ++i) {
    json s;
    s["system_id"] = i < g.trajectories.size() ? g.trajectories[i].system_id : std::string();
    s["A"] = matrix_to_json(g.systems[i].A);
    s["B"] = matrix_to_json(g.systems[i].B);
    systems.push_back(std::move(s));
  }
  j["systems"] = std::move(systems);
  return j;
}

json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) r.push_back(m(i, k));
    rows.push_back(std::move(r));
  }
  return rows;
}

MatrixXd matrix_from_json(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ValidationError(field + " must be a nonempty array of rows");
  const std::size_t cols = j[0].size();
  MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) throw ValidationError(field + ": rows have unequal lengths");
    for (std::size_t k = 0; k < cols; ++k) {
      if (!j[i][k].is_number()) throw ValidationError(field + ": non-numeric entry");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
    }
  }
  if (!m.allFinite()) throw ValidationError(field + ": non-finite entry");
  return m;
}

ControllerFile controller_from_certificate(const SynthesisCertificate& cert, ControllerProvenance prov) {
  ControllerFile c;
  c.nx = static_cast<int>(cert.P.rows());
  c.nu = static_cast<int>(cert.K.rows());
  c.K = cert.K;
  c.P = cert.P;
  c.a = cert.a;
  c.b = cert.b;
  c.delta = cert.delta;
  c.per_scenario_margins = cert.per_scenario_margins;
  c.provenance = std::move(prov);
  return c;
}

json controller_to_json(const ControllerFile& c) {
  json j;
  j["nx"] = c.nx;
  j["nu"] = c.nu;
  j["K"] = matrix_to_json(c.K);
  j["P"] = matrix_to_json(c.P);
  j["a"] = c.a;
  j["b"] = c.b;
  j["delta"] = c.delta;
  j["per_scenario_margins"] = c.per_scenario_margins;
  json prov;
  prov["dataset_hash"] = c.provenance.dataset_hash;
  prov["seeds"] = c.provenance.seeds;
  prov["tool_version"] = c.provenance.tool_version;
  j["provenance"] = std::move(prov);
  return j;
}

ControllerFile controller_from_json(const json& j) {
  const std::string where = "controller";
  if (!j.is_object()) throw ValidationError("controller: top level must be an object");
  ControllerFile c;
  c.nx = require_int(j, "nx", where, 1);
  c.nu = require_int(j, "nu", where, 1);
  c.K = matrix_from_json(require(j, "K", where), "controller.K");
  c.P = matrix_from_json(require(j, "P", where), "controller.P");
  if (c.K.rows() != c.nu || c.K.cols() != c.nx) throw ValidationError("controller.K must be nu x nx");
  if (c.P.rows() != c.nx || c.P.cols() != c.nx) throw ValidationError("controller.P must be nx x nx");
  c.a = require_number(j, "a", where);
  c.b = require_number(j, "b", where);
  c.delta = require_number(j, "delta", where);
  if (c.a < 0.0) throw ValidationError("controller.a must be >= 0");
  if (!(c.b > 0.0)) throw ValidationError("controller.b must be > 0");
  const json& margins = require(j, "per_scenario_margins", where);
  if (!margins.is_array()) throw ValidationError("controller.per_scenario_margins must be an array");
  for (const auto& v : margins) {
    if (!v.is_number()) throw ValidationError("controller.per_scenario_margins has a non-numeric entry");
    c.per_scenario_margins.push_back(v.get<double>());
  }
  const json& prov = require(j, "provenance", where);
  const json& hash = require(prov, "dataset_hash", "controller.provenance");
  const json& seeds = require(prov, "seeds", "controller.provenance");
  const json& ver = require(prov, "tool_version", "controller.provenance");
  if (!hash.is_string() || !ver.is_string() || !seeds.is_array())
    throw ValidationError("controller.provenance has fields of the wrong type");
  c.provenance.dataset_hash = hash.get<std::string>();
  c.provenance.tool_version = ver.get<std::string>();
  for (const auto& s : seeds) {
    if (!s.is_number_unsigned() && !s.is_number_integer())
      throw ValidationError("controller.provenance.seeds must hold integers");
    c.provenance.seeds.push_back(s.get<std::uint64_t>());
  }
  return c;
}

json validation_report_to_json(const ValidationReport& r) {
  json j;
  j["n_test"] = r.n_test;
  j["n_unstable_spectral"] = r.n_unstable_spectral;
  j["n_violating_quadratic"] = r.n_violating_quadratic;
  j["alpha_hat_spectral"] = r.alpha_hat_spectral;
  j["alpha_hat_quadratic"] = r.alpha_hat_quadratic;
  j["seed"] = r.seed;
  return j;
}

std::string read_text_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + p.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& p, const std::string& content) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::filesystem::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot open '" + tmp.string() + "' for writing");
    out << content;
    if (!out) throw ValidationError("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, p);
}

json read_json_file(const std::filesystem::path& p) {
  const std::string text = read_text_file(p);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError("'" + p.string() + "' is not valid JSON: " + e.what());
  }
}

void write_json_file(const std::filesystem::path& p, const json& j) { write_text_file(p, j.dump(2) + "\n"); }

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 || EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("SHA-256 computation failed");
  }
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_raster_csv(const std::filesystem::path& p, const ConsistentSetRaster& r) {
  std::string out = "a,b,inside\n";
  out.reserve(out.size() + static_cast<std::size_t>(r.resolution) * r.resolution * 24);
  for (int i = 0; i < r.resolution; ++i)
    for (int j = 0; j < r.resolution; ++j) {
      out += format_double(r.a_at(i));
      out += ',';
      out += format_double(r.b_at(j));
      out += r.inside(i, j) ? ",1\n" : ",0\n";
    }
  write_text_file(p, out);
}

}  // namespace scenario_ddc::io
