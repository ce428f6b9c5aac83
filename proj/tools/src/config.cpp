#include "magmap_cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace magmap::cli {

namespace {

using T = ValueType;

KeySpec positive(std::string name, T type, std::string def, std::string help) {
  KeySpec k{std::move(name), type, std::move(def), std::move(help)};
  k.min = 0.0;
  k.strictly_greater = true;
  return k;
}

KeySpec at_least(std::string name, T type, std::string def, double min, std::string help) {
  KeySpec k{std::move(name), type, std::move(def), std::move(help)};
  k.min = min;
  return k;
}

KeySpec choice(std::string name, std::string def, std::vector<std::string> choices, std::string help) {
  KeySpec k{std::move(name), T::Choice, std::move(def), std::move(help)};
  k.choices = std::move(choices);
  return k;
}

std::vector<KeySpec> make_schema() {
  return {
      // files
      {"data", T::String, "", "measurement CSV (x,y,z,Bx,By,Bz)"},
      {"model", T::String, "", "fitted map (binary)"},
      {"map", T::String, "", "predicted map table"},
      {"image", T::String, "", "magnitude heatmap (PGM)"},
      {"certainty", T::String, "", "certainty raster (PGM)"},
      at_least("seed", T::Int, "0", 0, "random seed"),
      // hyperparameters
      positive("hyp.length_scale", T::Double, "2", "length scale l"),
      positive("hyp.signal_variance", T::Double, "1", "signal variance sigma_f^2"),
      positive("hyp.noise_variance", T::Double, "0.01", "noise variance sigma_y^2"),
      {"hyp.train", T::Bool, "false", "fit hyperparameters on a data subset before fitting the map"},
      at_least("hyp.train_subset", T::Int, "500", 1, "subset size for hyperparameter training"),
      at_least("hyp.train_evaluations", T::Int, "200", 1, "NLML evaluation budget"),
      // synthetic data
      {"sim.x_min", T::Double, "-20", "synthetic box"},
      {"sim.x_max", T::Double, "20", "synthetic box"},
      {"sim.y_min", T::Double, "-20", "synthetic box"},
      {"sim.y_max", T::Double, "20", "synthetic box"},
      {"sim.z", T::Double, "0.01", "height of the synthetic plane"},
      at_least("sim.n_points", T::Int, "6000", 1, "number of synthetic points"),
      choice("sim.sampler", "auto", {"auto", "exact", "spectral"}, "prior sampler"),
      at_least("sim.features", T::Int, "8192", 1, "random Fourier features of the spectral sampler"),
      at_least("dense.max_dimension", T::Int, "6000", 1, "cap on 3N for dense factorizations"),
      // grid
      at_least("grid.nx", T::Int, "40", 4, "inducing nodes along x"),
      at_least("grid.ny", T::Int, "40", 4, "inducing nodes along y"),
      at_least("grid.nz", T::Int, "5", 4, "inducing nodes along z"),
      at_least("grid.padding", T::IntList, "2,2,1", 0, "padding cells per dimension"),
      {"grid.x_min", T::Double, "", "grid data bounds (default: data bounding box)"},
      {"grid.x_max", T::Double, "", ""},
      {"grid.y_min", T::Double, "", ""},
      {"grid.y_max", T::Double, "", ""},
      {"grid.z_min", T::Double, "", ""},
      {"grid.z_max", T::Double, "", ""},
      positive("grid.flat_half_width", T::Double, "0.1", "half width used for a dimension in which all data coincide"),
      // solvers
      positive("cg.tolerance", T::Double, "1e-4", "relative residual tolerance"),
      at_least("cg.max_iterations", T::Int, "10000", 1, "CG iteration cap"),
      {"cg.precondition", T::Bool, "true", "Jacobi preconditioning"},
      at_least("lanczos.steps", T::Int, "100", 0, "Lanczos steps T (0 disables variance)"),
      choice("lanczos.start", "data", {"data", "random"}, "Lanczos start vector"),
      at_least("jitter", T::Double, "1e-8", 0, "relative diagonal jitter"),
      // prediction lattice
      positive("lattice.resolution", T::Double, "0.1", "lattice spacing when counts are not given"),
      {"lattice.x_min", T::Double, "", "lattice bounds (default: interpolable region of the model)"},
      {"lattice.x_max", T::Double, "", ""},
      {"lattice.y_min", T::Double, "", ""},
      {"lattice.y_max", T::Double, "", ""},
      {"lattice.z_min", T::Double, "", ""},
      {"lattice.z_max", T::Double, "", ""},
      at_least("lattice.nx", T::Int, "", 1, "lattice counts"),
      at_least("lattice.ny", T::Int, "", 1, ""),
      at_least("lattice.nz", T::Int, "", 1, ""),
      // evaluation protocol
      positive("eval.full_half_width", T::Double, "20", "half width of the simulated square"),
      positive("eval.areas", T::DoubleList, "10,20", "half widths of the evaluated areas"),
      at_least("eval.settings", T::IntList, "10,20,40,80,100,200", 4, "inducing nodes per horizontal axis"),
      at_least("eval.repetitions", T::Int, "10", 1, "repetitions per setting"),
      at_least("eval.z_nodes", T::Int, "5", 4, "inducing nodes along z"),
      positive("eval.z_spacing", T::Double, "0.1", "inducing grid spacing along z"),
      at_least("eval.xy_padding", T::Int, "1", 1, "padding cells along x and y"),
      positive("eval.train_fraction", T::Double, "0.8", "training share of each area"),
      {"eval.downsampled", T::Bool, "true", "run the budget-matched downsampled GP"},
      {"eval.full", T::Bool, "true", "run the full GP when it fits the dense cap"},
      // scaling benchmark
      at_least("bench.n0", T::Int, "20000", 1, "smallest data set"),
      at_least("bench.multiples", T::IntList, "1,2,4", 1, "data set sizes as multiples of n0"),
      at_least("bench.counts", T::IntList, "200,40,4", 4, "inducing grid counts"),
      at_least("bench.padding", T::IntList, "2,2,1", 0, "inducing grid padding"),
      {"bench.box", T::DoubleList, "-34,34,-5.25,5.25,0.2,1.8", "x_min,x_max,y_min,y_max,z_min,z_max"},
      at_least("bench.repeats", T::Int, "1", 1, "timed fits per size (best is reported)"),
      positive("bench.hyp", T::DoubleList, "0.5,0.04,1e-4", "length scale, signal and noise variance of the timed fits"),
      at_least("bench.features", T::Int, "1024", 1, "random Fourier features of the synthetic field"),
      // rendering
      at_least("render.z_index", T::Int, "", 0, "z slice of a 3D map table"),
  };
}

bool parse_double(std::string_view s, double& out) {
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && end == s.data() + s.size() && std::isfinite(out);
}

bool parse_int(std::string_view s, int& out) {
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && end == s.data() + s.size();
}

std::string trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return std::string(s.substr(a, b - a + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

const KeySpec& spec_of(const std::string& key) {
  const auto& all = schema();
  const auto it = std::find_if(all.begin(), all.end(), [&](const KeySpec& k) { return k.name == key; });
  if (it == all.end()) throw ConfigError("unknown configuration key '" + key + "'");
  return *it;
}

void check_bound(const KeySpec& spec, double v) {
  const bool ok = spec.strictly_greater ? v > spec.min : v >= spec.min;
  if (!ok) {
    std::ostringstream msg;
    msg << spec.name << ": value " << v << " must be " << (spec.strictly_greater ? "> " : ">= ") << spec.min;
    throw ConfigError(msg.str());
  }
}

void check_value(const KeySpec& spec, const std::string& value) {
  if (value.empty()) return;
  const auto bad = [&](const char* what) {
    return ConfigError(spec.name + ": '" + value + "' is not " + what);
  };
  switch (spec.type) {
    case T::Int: {
      int v;
      if (!parse_int(value, v)) throw bad("an integer");
      check_bound(spec, v);
      break;
    }
    case T::Double: {
      double v;
      if (!parse_double(value, v)) throw bad("a finite number");
      check_bound(spec, v);
      break;
    }
    case T::Bool:
      if (value != "true" && value != "false") throw bad("true or false");
      break;
    case T::String:
      break;
    case T::IntList:
      for (const auto& item : split_list(value)) {
        int v;
        if (!parse_int(item, v)) throw bad("a comma-separated integer list");
        check_bound(spec, v);
      }
      break;
    case T::DoubleList:
      for (const auto& item : split_list(value)) {
        double v;
        if (!parse_double(item, v)) throw bad("a comma-separated number list");
        check_bound(spec, v);
      }
      break;
    case T::Choice:
      if (std::find(spec.choices.begin(), spec.choices.end(), value) == spec.choices.end()) {
        std::string all;
        for (const auto& c : spec.choices) all += (all.empty() ? "" : "|") + c;
        throw bad(("one of " + all).c_str());
      }
      break;
  }
}

}  // namespace

const std::vector<KeySpec>& schema() {
  static const std::vector<KeySpec> keys = make_schema();
  return keys;
}

RunConfig::RunConfig() {
  for (const auto& k : schema()) {
    if (!k.default_value.empty()) values_[k.name] = k.default_value;
  }
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::string line;
  for (int line_no = 1; std::getline(in, line); ++line_no) {
    const auto hash = line.find('#');
    const std::string body = trim(line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
    }
    try {
      set(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void RunConfig::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const KeySpec& spec = spec_of(key);
  check_value(spec, value);
  if (value.empty()) {
    values_.erase(key);
  } else {
    values_[key] = value;
  }
}

bool RunConfig::has(const std::string& key) const {
  (void)spec_of(key);
  return values_.count(key) > 0;
}

namespace {

std::string missing(const std::string& key) { return key + " is not set"; }

}  // namespace

int RunConfig::get_int(const std::string& key) const {
  if (!has(key)) throw ConfigError(missing(key));
  int v = 0;
  parse_int(values_.at(key), v);
  return v;
}

double RunConfig::get_double(const std::string& key) const {
  if (!has(key)) throw ConfigError(missing(key));
  double v = 0;
  parse_double(values_.at(key), v);
  return v;
}

bool RunConfig::get_bool(const std::string& key) const {
  if (!has(key)) throw ConfigError(missing(key));
  return values_.at(key) == "true";
}

std::string RunConfig::get_string(const std::string& key) const {
  if (!has(key)) throw ConfigError(missing(key));
  return values_.at(key);
}

std::vector<int> RunConfig::get_int_list(const std::string& key) const {
  std::vector<int> out;
  for (const auto& item : split_list(get_string(key))) {
    int v = 0;
    parse_int(item, v);
    out.push_back(v);
  }
  return out;
}

std::vector<double> RunConfig::get_double_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split_list(get_string(key))) {
    double v = 0;
    parse_double(item, v);
    out.push_back(v);
  }
  return out;
}

std::string RunConfig::require_path(const std::string& key) const {
  if (!has(key)) throw ConfigError(key + " path is required (use --" + key + " or --set " + key + "=PATH)");
  return values_.at(key);
}

void RunConfig::validate() const {
  const auto pair = [&](const std::string& lo, const std::string& hi) {
    if (has(lo) && has(hi) && !(get_double(lo) < get_double(hi))) {
      throw ConfigError(lo + " must be < " + hi);
    }
  };
  pair("sim.x_min", "sim.x_max");
  pair("sim.y_min", "sim.y_max");
  for (const char* d : {"x", "y", "z"}) {
    const std::string g = std::string("grid.") + d;
    if (has(g + "_min") != has(g + "_max")) throw ConfigError(g + "_min and " + g + "_max must be given together");
    pair(g + "_min", g + "_max");
    const std::string l = std::string("lattice.") + d;
    if (has(l + "_min") && has(l + "_max") && get_double(l + "_min") > get_double(l + "_max")) {
      throw ConfigError(l + "_min must be <= " + l + "_max");
    }
  }
  const auto sized = [&](const std::string& key, std::size_t n) {
    if (get_int_list(key).size() != n) throw ConfigError(key + " needs " + std::to_string(n) + " values");
  };
  sized("grid.padding", 3);
  sized("bench.counts", 3);
  sized("bench.padding", 3);
  if (get_double_list("bench.hyp").size() != 3) throw ConfigError("bench.hyp needs 3 values");
  const auto box = get_double_list("bench.box");
  if (box.size() != 6) throw ConfigError("bench.box needs 6 values");
  for (int d = 0; d < 3; ++d) {
    if (!(box[2 * d] < box[2 * d + 1])) throw ConfigError("bench.box: each min must be < its max");
  }
  if (!(get_double("eval.train_fraction") < 1.0)) throw ConfigError("eval.train_fraction must be < 1");
  for (double w : get_double_list("eval.areas")) {
    if (w > get_double("eval.full_half_width")) throw ConfigError("eval.areas must not exceed eval.full_half_width");
  }
}

}  // namespace magmap::cli
