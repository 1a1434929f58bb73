#include "scenario_ddc/config.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "scenario_ddc/error.hpp"
#include "scenario_ddc/io.hpp"

namespace scenario_ddc {

namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s{
      {"experiment", {"master_seed", "output_dir"}},
      {"fleet",
       {"sigma2", "truncation", "wbar", "input_law", "input_scale", "x0_law", "x0_magnitude", "x0", "M", "N"}},
      {"sweep", {"sigma2", "N", "M", "repetitions", "n_test"}},
      {"scenario", {"alpha", "epsilon"}},
      {"solver",
       {"delta", "tol_psd", "feasibility_tol", "max_iterations", "backend", "objective", "record_timing",
        "slater_retries"}},
      {"uncertainty", {"a_true", "b_true", "wbar", "lengths", "seeds", "a_min", "a_max", "b_min", "b_max", "resolution"}},
  };
  return s;
}

std::string unquote(std::string v) {
  boost::algorithm::trim(v);
  if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') || (v.front() == '\'' && v.back() == '\'')))
    v = v.substr(1, v.size() - 2);
  return v;
}

struct Reader {
  const pt::ptree& tree;
  std::string origin;

  const std::string* raw(const std::string& section, const std::string& key, std::string& storage) const {
    const auto sec = tree.get_child_optional(section);
    if (!sec) return nullptr;
    const auto v = sec->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
    if (!v) return nullptr;
    storage = unquote(*v);
    return &storage;
  }

  [[noreturn]] void fail(const std::string& section, const std::string& key, const std::string& what) const {
    throw ValidationError(origin + ": [" + section + "] " + key + ": " + what);
  }

  double number(const std::string& text, const std::string& section, const std::string& key) const {
    try {
      std::size_t pos = 0;
      const double v = std::stod(text, &pos);
      if (pos != text.size() || !std::isfinite(v)) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      fail(section, key, "expected a finite number, got '" + text + "'");
    }
  }

  long long integer(const std::string& text, const std::string& section, const std::string& key) const {
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(text, &pos);
      if (pos != text.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      fail(section, key, "expected an integer, got '" + text + "'");
    }
  }

  std::vector<std::string> items(std::string text) const {
    boost::algorithm::trim(text);
    if (!text.empty() && text.front() == '[' && text.back() == ']') text = text.substr(1, text.size() - 2);
    std::vector<std::string> parts;
    boost::algorithm::split(parts, text, boost::is_any_of(","));
    std::vector<std::string> out;
    for (auto& p : parts) {
      boost::algorithm::trim(p);
      if (!p.empty()) out.push_back(unquote(p));
    }
    return out;
  }

  void get(const std::string& s, const std::string& k, double& out) const {
    std::string st;
    if (auto v = raw(s, k, st)) out = number(*v, s, k);
  }
  void get(const std::string& s, const std::string& k, int& out) const {
    std::string st;
    if (auto v = raw(s, k, st)) {
      const long long x = integer(*v, s, k);
      if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) fail(s, k, "out of range");
      out = static_cast<int>(x);
    }
  }
  void get(const std::string& s, const std::string& k, std::uint64_t& out) const {
    std::string st;
    if (auto v = raw(s, k, st)) {
      try {
        std::size_t pos = 0;
        if (!v->empty() && (*v)[0] == '-') throw std::invalid_argument("negative");
        out = std::stoull(*v, &pos);
        if (pos != v->size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        fail(s, k, "expected a nonnegative integer, got '" + *v + "'");
      }
    }
  }
  void get(const std::string& s, const std::string& k, std::string& out) const {
    std::string st;
    if (auto v = raw(s, k, st)) out = *v;
  }
  void get(const std::string& s, const std::string& k, bool& out) const {
    std::string st;
    if (auto v = raw(s, k, st)) {
      if (*v == "true" || *v == "1")
        out = true;
      else if (*v == "false" || *v == "0")
        out = false;
      else
        fail(s, k, "expected true or false, got '" + *v + "'");
    }
  }
  void get(const std::string& s, const std::string& k, std::vector<double>& out) const {
    std::string st;
    if (auto v = raw(s, k, st)) {
      out.clear();
      for (const auto& item : items(*v)) out.push_back(number(item, s, k));
    }
  }
  void get(const std::string& s, const std::string& k, std::vector<int>& out) const {
    std::string st;
    if (auto v = raw(s, k, st)) {
      out.clear();
      for (const auto& item : items(*v)) out.push_back(static_cast<int>(integer(item, s, k)));
    }
  }
};

template <class T>
void require(bool ok, const std::string& key, const T& what) {
  if (!ok) throw ValidationError(std::string("config: ") + key + ": " + what);
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + io::format_double(v[i]);
  return out + "]";
}

std::string join_ints(const std::vector<int>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + std::to_string(v[i]);
  return out + "]";
}

}  // namespace

void ExperimentConfig::validate() const {
  require(fleet.sigma2 > 0.0, "[fleet] sigma2", "must be > 0");
  require(fleet.wbar >= 0.0, "[fleet] wbar", "must be >= 0");
  require(fleet.input_law.scale > 0.0, "[fleet] input_scale", "must be > 0");
  require(fleet.x0_law.kind == X0LawKind::kFixed || fleet.x0_law.magnitude > 0.0, "[fleet] x0_magnitude",
          "must be > 0");
  require(fleet.x0_law.kind != X0LawKind::kFixed || fleet.x0_law.fixed.size() == 3, "[fleet] x0",
          "a fixed x0 needs 3 entries for the benchmark fleet");
  require(fleet.M >= 1, "[fleet] M", "must be >= 1");
  require(fleet.N >= 1, "[fleet] N", "must be >= 1");
  require(!sweep.sigma2.empty(), "[sweep] sigma2", "list must be nonempty");
  require(!sweep.N.empty(), "[sweep] N", "list must be nonempty");
  require(!sweep.M.empty(), "[sweep] M", "list must be nonempty");
  for (double s : sweep.sigma2) require(s > 0.0, "[sweep] sigma2", "entries must be > 0");
  for (int n : sweep.N) require(n >= 1, "[sweep] N", "entries must be >= 1");
  for (int m : sweep.M) require(m >= 1, "[sweep] M", "entries must be >= 1");
  require(sweep.repetitions >= 1, "[sweep] repetitions", "must be >= 1");
  require(sweep.n_test >= 1, "[sweep] n_test", "must be >= 1");
  require(scenario.alpha > 0.0 && scenario.alpha < 1.0, "[scenario] alpha", "must lie in (0, 1)");
  require(scenario.epsilon > 0.0 && scenario.epsilon < 1.0, "[scenario] epsilon", "must lie in (0, 1)");
  require(solver.delta >= 0.0 && solver.delta <= 1.0, "[solver] delta", "must lie in [0, 1]");
  require(solver.tol_psd > 0.0, "[solver] tol_psd", "must be > 0");
  require(solver.feasibility_tol > 0.0, "[solver] feasibility_tol", "must be > 0");
  require(solver.max_iterations >= 1, "[solver] max_iterations", "must be >= 1");
  require(solver.slater_retries >= 0, "[solver] slater_retries", "must be >= 0");
  require(solver.backend == "interior-point" || solver.backend == "reference", "[solver] backend",
          "unknown backend '" + solver.backend + "' (available: interior-point)");
  require(uncertainty.wbar >= 0.0, "[uncertainty] wbar", "must be >= 0");
  require(!uncertainty.lengths.empty(), "[uncertainty] lengths", "list must be nonempty");
  for (int m : uncertainty.lengths) require(m >= 1, "[uncertainty] lengths", "entries must be >= 1");
  require(uncertainty.seeds >= 2, "[uncertainty] seeds", "must be >= 2 (dispersion needs two rasters)");
  require(uncertainty.a_max > uncertainty.a_min, "[uncertainty] a_max", "must exceed a_min");
  require(uncertainty.b_max > uncertainty.b_min, "[uncertainty] b_max", "must exceed b_min");
  require(uncertainty.resolution >= 2, "[uncertainty] resolution", "must be >= 2");
  require(!output_dir.empty(), "[experiment] output_dir", "must be nonempty");
}

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& origin) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ValidationError(origin + ": line " + std::to_string(e.line()) + ": " + e.message());
  }

  for (const auto& [section, body] : tree) {
    const auto it = schema().find(section);
    if (it == schema().end()) {
      if (body.empty())
        throw ValidationError(origin + ": key '" + section + "' must be inside a [section]");
      std::string known;
      for (const auto& [name, keys] : schema()) known += (known.empty() ? "" : ", ") + name;
      throw ValidationError(origin + ": unknown section [" + section + "] (expected one of: " + known + ")");
    }
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) {
        std::string known;
        for (const auto& k : it->second) known += (known.empty() ? "" : ", ") + k;
        throw ValidationError(origin + ": unknown key '" + key + "' in [" + section + "] (expected one of: " +
                              known + ")");
      }
    }
  }

  const Reader r{tree, origin};
  ExperimentConfig c;
  r.get("experiment", "master_seed", c.master_seed);
  r.get("experiment", "output_dir", c.output_dir);

  r.get("fleet", "sigma2", c.fleet.sigma2);
  if (std::string st; r.raw("fleet", "truncation", st)) {
    try {
      c.fleet.truncation = truncation_from_string(st);
    } catch (const ValidationError& e) {
      r.fail("fleet", "truncation", e.what());
    }
  }
  r.get("fleet", "wbar", c.fleet.wbar);
  if (std::string st; r.raw("fleet", "input_law", st)) {
    if (st == "uniform-box")
      c.fleet.input_law.kind = InputLawKind::kUniformBox;
    else if (st == "gaussian")
      c.fleet.input_law.kind = InputLawKind::kGaussian;
    else
      r.fail("fleet", "input_law", "expected uniform-box or gaussian, got '" + st + "'");
  }
  r.get("fleet", "input_scale", c.fleet.input_law.scale);
  if (std::string st; r.raw("fleet", "x0_law", st)) {
    if (st == "uniform-box")
      c.fleet.x0_law.kind = X0LawKind::kUniformBox;
    else if (st == "fixed")
      c.fleet.x0_law.kind = X0LawKind::kFixed;
    else
      r.fail("fleet", "x0_law", "expected uniform-box or fixed, got '" + st + "'");
  }
  r.get("fleet", "x0_magnitude", c.fleet.x0_law.magnitude);
  {
    std::vector<double> x0;
    r.get("fleet", "x0", x0);
    if (!x0.empty()) c.fleet.x0_law.fixed = Eigen::Map<const VectorXd>(x0.data(), static_cast<Eigen::Index>(x0.size()));
  }
  r.get("fleet", "M", c.fleet.M);
  r.get("fleet", "N", c.fleet.N);

  r.get("sweep", "sigma2", c.sweep.sigma2);
  r.get("sweep", "N", c.sweep.N);
  r.get("sweep", "M", c.sweep.M);
  r.get("sweep", "repetitions", c.sweep.repetitions);
  r.get("sweep", "n_test", c.sweep.n_test);

  r.get("scenario", "alpha", c.scenario.alpha);
  r.get("scenario", "epsilon", c.scenario.epsilon);

  r.get("solver", "delta", c.solver.delta);
  r.get("solver", "tol_psd", c.solver.tol_psd);
  r.get("solver", "feasibility_tol", c.solver.feasibility_tol);
  r.get("solver", "max_iterations", c.solver.max_iterations);
  r.get("solver", "backend", c.solver.backend);
  if (std::string st; r.raw("solver", "objective", st)) {
    try {
      c.solver.objective = synthesis_objective_from_string(st);
    } catch (const ValidationError& e) {
      r.fail("solver", "objective", e.what());
    }
  }
  r.get("solver", "record_timing", c.solver.record_timing);
  r.get("solver", "slater_retries", c.solver.slater_retries);

  r.get("uncertainty", "a_true", c.uncertainty.a_true);
  r.get("uncertainty", "b_true", c.uncertainty.b_true);
  r.get("uncertainty", "wbar", c.uncertainty.wbar);
  r.get("uncertainty", "lengths", c.uncertainty.lengths);
  r.get("uncertainty", "seeds", c.uncertainty.seeds);
  r.get("uncertainty", "a_min", c.uncertainty.a_min);
  r.get("uncertainty", "a_max", c.uncertainty.a_max);
  r.get("uncertainty", "b_min", c.uncertainty.b_min);
  r.get("uncertainty", "b_max", c.uncertainty.b_max);
  r.get("uncertainty", "resolution", c.uncertainty.resolution);

  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return parse_experiment_config(io::read_text_file(path), path.string());
}

std::string render_experiment_config(const ExperimentConfig& c) {
  std::ostringstream os;
  auto d = [](double v) { return io::format_double(v); };
  os << "[experiment]\n"
     << "master_seed = " << c.master_seed << "\n"
     << "output_dir = \"" << c.output_dir << "\"\n\n"
     << "[fleet]\n"
     << "sigma2 = " << d(c.fleet.sigma2) << "\n"
     << "truncation = \"" << to_string(c.fleet.truncation) << "\"\n"
     << "wbar = " << d(c.fleet.wbar) << "\n"
     << "input_law = \"" << to_string(c.fleet.input_law.kind) << "\"\n"
     << "input_scale = " << d(c.fleet.input_law.scale) << "\n"
     << "x0_law = \"" << to_string(c.fleet.x0_law.kind) << "\"\n"
     << "x0_magnitude = " << d(c.fleet.x0_law.magnitude) << "\n";
  if (c.fleet.x0_law.fixed.size() > 0) {
    std::vector<double> x0(c.fleet.x0_law.fixed.data(), c.fleet.x0_law.fixed.data() + c.fleet.x0_law.fixed.size());
    os << "x0 = " << join_doubles(x0) << "\n";
  }
  os << "M = " << c.fleet.M << "\n"
     << "N = " << c.fleet.N << "\n\n"
     << "[sweep]\n"
     << "sigma2 = " << join_doubles(c.sweep.sigma2) << "\n"
     << "N = " << join_ints(c.sweep.N) << "\n"
     << "M = " << join_ints(c.sweep.M) << "\n"
     << "repetitions = " << c.sweep.repetitions << "\n"
     << "n_test = " << c.sweep.n_test << "\n\n"
     << "[scenario]\n"
     << "alpha = " << d(c.scenario.alpha) << "\n"
     << "epsilon = " << d(c.scenario.epsilon) << "\n\n"
     << "[solver]\n"
     << "delta = " << d(c.solver.delta) << "\n"
     << "tol_psd = " << d(c.solver.tol_psd) << "\n"
     << "feasibility_tol = " << d(c.solver.feasibility_tol) << "\n"
     << "max_iterations = " << c.solver.max_iterations << "\n"
     << "backend = \"" << c.solver.backend << "\"\n"
     << "objective = \"" << to_string(c.solver.objective) << "\"\n"
     << "record_timing = " << (c.solver.record_timing ? "true" : "false") << "\n"
     << "slater_retries = " << c.solver.slater_retries << "\n\n"
     << "[uncertainty]\n"
     << "a_true = " << d(c.uncertainty.a_true) << "\n"
     << "b_true = " << d(c.uncertainty.b_true) << "\n"
     << "wbar = " << d(c.uncertainty.wbar) << "\n"
     << "lengths = " << join_ints(c.uncertainty.lengths) << "\n"
     << "seeds = " << c.uncertainty.seeds << "\n"
     << "a_min = " << d(c.uncertainty.a_min) << "\n"
     << "a_max = " << d(c.uncertainty.a_max) << "\n"
     << "b_min = " << d(c.uncertainty.b_min) << "\n"
     << "b_max = " << d(c.uncertainty.b_max) << "\n"
     << "resolution = " << c.uncertainty.resolution << "\n";
  return os.str();
}

}  // namespace scenario_ddc
