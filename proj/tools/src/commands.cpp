#include "magmap_cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "magmap/data.hpp"
#include "magmap/dski.hpp"
#include "magmap/exact_gp.hpp"
#include "magmap/protocol.hpp"
#include "magmap_cli/render.hpp"

namespace magmap::cli {

namespace {

using json = nlohmann::json;

Hyperparameters hyperparameters(const RunConfig& c) {
  return {c.get_double("hyp.length_scale"), c.get_double("hyp.signal_variance"), c.get_double("hyp.noise_variance")};
}

DenseOptions dense_options(const RunConfig& c) {
  DenseOptions d;
  d.max_dimension = c.get_int("dense.max_dimension");
  d.relative_jitter = c.get_double("jitter");
  return d;
}

SamplerKind sampler_kind(const std::string& s) {
  if (s == "exact") return SamplerKind::Exact;
  if (s == "spectral") return SamplerKind::Spectral;
  return SamplerKind::Auto;
}

std::uint64_t seed_of(const RunConfig& c) { return static_cast<std::uint64_t>(c.get_int("seed")); }

InducingGrid grid_from_config(const RunConfig& c, const Points& positions) {
  const char* names[3] = {"x", "y", "z"};
  std::array<Interval, 3> bounds{};
  const bool need_box = std::any_of(std::begin(names), std::end(names),
                                    [&](const char* d) { return !c.has(std::string("grid.") + d + "_min"); });
  if (need_box && positions.rows() == 0) throw ConfigError("grid bounds are required when the data set is empty");
  const auto box = need_box ? bounding_box(positions) : bounds;
  const double flat = c.get_double("grid.flat_half_width");
  for (int d = 0; d < 3; ++d) {
    const std::string key = std::string("grid.") + names[d];
    auto& b = bounds[static_cast<std::size_t>(d)];
    if (c.has(key + "_min")) {
      b = {c.get_double(key + "_min"), c.get_double(key + "_max")};
    } else {
      b = box[static_cast<std::size_t>(d)];
      if (b.upper - b.lower <= 1e-9 * std::max(1.0, std::abs(b.lower))) {
        const double mid = 0.5 * (b.lower + b.upper);
        b = {mid - flat, mid + flat};
      }
    }
  }
  const auto pad = c.get_int_list("grid.padding");
  return build_grid(bounds, {c.get_int("grid.nx"), c.get_int("grid.ny"), c.get_int("grid.nz")}, {pad[0], pad[1], pad[2]});
}

Lattice lattice_from_config(const RunConfig& c, const InducingGrid& grid) {
  const char* names[3] = {"x", "y", "z"};
  const double res = c.get_double("lattice.resolution");
  Lattice lat;
  for (int d = 0; d < 3; ++d) {
    const std::string key = std::string("lattice.") + names[d];
    const Interval region = grid.interpolable(d);
    auto& ax = lat.axes[static_cast<std::size_t>(d)];
    const bool given = c.has(key + "_min") || c.has(key + "_max");
    if (d == 2 && !given) {
      // One slice through the middle of the model.
      ax.lower = ax.upper = 0.5 * (region.lower + region.upper);
    } else {
      ax.lower = c.has(key + "_min") ? c.get_double(key + "_min") : region.lower;
      ax.upper = c.has(key + "_max") ? c.get_double(key + "_max") : region.upper;
    }
    const std::string count_key = std::string("lattice.n") + names[d];
    if (c.has(count_key)) {
      ax.count = c.get_int(count_key);
    } else if (ax.upper > ax.lower) {
      ax.count = static_cast<int>(std::floor((ax.upper - ax.lower) / res + 1e-9)) + 1;
      ax.upper = ax.lower + (ax.count - 1) * res;
      if (ax.count == 1) ax.upper = ax.lower;
    } else {
      ax.count = 1;
    }
    if (ax.count == 1) ax.upper = ax.lower;
  }
  lat.validate();
  return lat;
}

}  // namespace

int cmd_synth(const RunConfig& c, std::ostream& out) {
  const std::string path = c.require_path("data");
  SimulationOptions o;
  o.box = {Interval{c.get_double("sim.x_min"), c.get_double("sim.x_max")},
           Interval{c.get_double("sim.y_min"), c.get_double("sim.y_max")}};
  o.z_level = c.get_double("sim.z");
  o.n_points = c.get_int("sim.n_points");
  o.hyp = hyperparameters(c);
  o.seed = seed_of(c);
  o.sampler = sampler_kind(c.get_string("sim.sampler"));
  o.spectral_features = c.get_int("sim.features");
  o.dense = dense_options(c);
  const SimulationDataset d = make_simulation_dataset(o);
  save_measurements(d.data, path);
  out << json{{"command", "synth"}, {"rows", d.data.size()}, {"sampler", to_string(d.sampler)}, {"data", path}}.dump()
      << '\n';
  return kOk;
}

int cmd_fit(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const std::string data_path = c.require_path("data");
  const std::string model_path = c.require_path("model");
  const TrainingSet data = load_measurements(data_path);
  Hyperparameters hyp = hyperparameters(c);
  json diag{{"command", "fit"}};

  if (c.get_bool("hyp.train")) {
    const Eigen::Index n = std::min<Eigen::Index>(c.get_int("hyp.train_subset"), data.size());
    const TrainingSet subset = downsample_baseline(data, n, seed_of(c));
    SearchOptions search;
    search.max_evaluations = c.get_int("hyp.train_evaluations");
    const TrainingResult r = train_hyperparameters(subset, hyp, search, dense_options(c));
    hyp = r.hyperparameters;
    diag["trained"] = {{"length_scale", hyp.length_scale},
                       {"signal_variance", hyp.signal_variance},
                       {"noise_variance", hyp.noise_variance},
                       {"nlml", r.nlml},
                       {"evaluations", r.evaluations}};
  }

  const InducingGrid grid = grid_from_config(c, data.positions);
  FitOptions fit;
  fit.cg.tolerance = c.get_double("cg.tolerance");
  fit.cg.max_iterations = c.get_int("cg.max_iterations");
  fit.precondition = c.get_bool("cg.precondition");
  fit.lanczos_steps = c.get_int("lanczos.steps");
  fit.lanczos_start = c.get_string("lanczos.start") == "random" ? LanczosStart::Random : LanczosStart::Data;
  fit.seed = seed_of(c);
  fit.relative_jitter = c.get_double("jitter");

  const FittedMap map = fit_dski(data, grid, hyp, fit);
  map.save(model_path);
  const auto& d = map.diagnostics();
  diag["measurements"] = d.measurements;
  diag["grid"] = grid.counts();
  diag["inducing"] = grid.size();
  diag["J"] = d.cg_iterations;
  diag["residual"] = d.cg_residual;
  diag["converged"] = d.cg_converged;
  diag["T"] = d.lanczos_steps;
  diag["lanczos_breakdown"] = d.lanczos_breakdown;
  diag["wall_seconds"] = d.seconds;
  diag["model"] = model_path;
  out << diag.dump() << '\n';
  if (!d.cg_converged) {
    err << "warning: CG stopped after " << d.cg_iterations << " iterations at relative residual " << d.cg_residual
        << " (tolerance " << fit.cg.tolerance << "); model written anyway\n";
    return kNumericalError;
  }
  return kOk;
}

int cmd_predict(const RunConfig& c, std::ostream& out) {
  const FittedMap map = FittedMap::load(c.require_path("model"));
  const std::string path = c.require_path("map");
  const Lattice lattice = lattice_from_config(c, map.grid());
  const MapTable table = map.predict_grid(lattice);
  save_map(table, path);
  out << json{{"command", "predict"},
              {"nodes", table.size()},
              {"shape", table.shape},
              {"clamped", table.clamped},
              {"map", path}}
             .dump()
      << '\n';
  return kOk;
}

int cmd_eval(const RunConfig& c, std::ostream& out) {
  EvalOptions o;
  o.simulation.hyp = hyperparameters(c);
  o.simulation.z_level = c.get_double("sim.z");
  o.simulation.n_points = c.get_int("sim.n_points");
  o.simulation.sampler = sampler_kind(c.get_string("sim.sampler"));
  o.simulation.spectral_features = c.get_int("sim.features");
  o.simulation.dense = dense_options(c);
  o.full_half_width = c.get_double("eval.full_half_width");
  o.area_half_widths = c.get_double_list("eval.areas");
  o.settings = c.get_int_list("eval.settings");
  o.z_nodes = c.get_int("eval.z_nodes");
  o.z_spacing = c.get_double("eval.z_spacing");
  o.xy_padding = c.get_int("eval.xy_padding");
  o.repetitions = c.get_int("eval.repetitions");
  o.seed = seed_of(c);
  o.train_fraction = c.get_double("eval.train_fraction");
  o.cg.tolerance = c.get_double("cg.tolerance");
  o.cg.max_iterations = c.get_int("cg.max_iterations");
  o.precondition = c.get_bool("cg.precondition");
  o.run_downsampled = c.get_bool("eval.downsampled");
  o.run_full = c.get_bool("eval.full");
  o.dense = dense_options(c);

  const EvalResult r = run_evaluation(o);
  write_eval_table(r, out);
  json summary{{"command", "eval"}, {"sampler", to_string(r.sampler)}, {"repetitions", o.repetitions}};
  json areas = json::array();
  for (const auto& a : r.areas) {
    json settings = json::array();
    for (std::size_t s = 0; s < r.settings.size(); ++s) {
      const auto& cell = a.cells[s];
      settings.push_back({{"m", r.settings[s]},
                          {"dski", cell.dski.empty() ? json(nullptr) : json(mean_of(cell.dski))},
                          {"downsampled", cell.downsampled.empty() ? json(nullptr) : json(mean_of(cell.downsampled))},
                          {"failures", cell.failures.size()}});
    }
    areas.push_back({{"half_width", a.half_width},
                     {"full", a.full.empty() ? json(nullptr) : json(mean_of(a.full))},
                     {"settings", settings}});
  }
  summary["areas"] = areas;
  out << summary.dump() << '\n';
  return kOk;
}

int cmd_bench(const RunConfig& c, std::ostream& out) {
  BenchOptions o;
  o.n0 = c.get_int("bench.n0");
  o.multiples = c.get_int_list("bench.multiples");
  const auto counts = c.get_int_list("bench.counts");
  const auto pad = c.get_int_list("bench.padding");
  const auto box = c.get_double_list("bench.box");
  o.grid_counts = {counts[0], counts[1], counts[2]};
  o.padding = {pad[0], pad[1], pad[2]};
  o.box = {Interval{box[0], box[1]}, Interval{box[2], box[3]}, Interval{box[4], box[5]}};
  const auto hyp = c.get_double_list("bench.hyp");
  o.hyp = {hyp[0], hyp[1], hyp[2]};
  o.spectral_features = c.get_int("bench.features");
  o.repeats = c.get_int("bench.repeats");
  o.seed = seed_of(c);
  o.fit.cg.tolerance = c.get_double("cg.tolerance");
  o.fit.cg.max_iterations = c.get_int("cg.max_iterations");
  o.fit.precondition = c.get_bool("cg.precondition");
  o.fit.lanczos_steps = c.get_int("lanczos.steps");
  o.fit.relative_jitter = c.get_double("jitter");

  const auto rows = run_scaling_bench(o);
  write_bench_table(rows, out);
  json summary{{"command", "bench"}};
  json list = json::array();
  for (const auto& r : rows) {
    list.push_back({{"n", r.n}, {"seconds", r.seconds}, {"ratio", r.ratio}, {"J", r.cg_iterations}, {"T", r.lanczos_steps}});
  }
  summary["rows"] = list;
  out << summary.dump() << '\n';
  return kOk;
}

int cmd_render(const RunConfig& c, std::ostream& out) {
  const MapTable table = load_map(c.require_path("map"));
  const std::string image_path = c.require_path("image");
  const int z = c.has("render.z_index") ? c.get_int("render.z_index") : -1;
  const Image img = render_magnitude(table, z);
  write_pgm(img, image_path);
  json diag{{"command", "render"}, {"width", img.width}, {"height", img.height}, {"image", image_path}};
  if (c.has("certainty")) {
    write_pgm(render_certainty(table, z), c.get_string("certainty"));
    diag["certainty"] = c.get_string("certainty");
  }
  out << diag.dump() << '\n';
  return kOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Curl-free magnetic field maps with structured kernel interpolation", "magmap"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::vector<std::string> overrides;
  struct Flag {
    const char* name;
    const char* key;
    const char* help;
    std::string value;
  };
  std::vector<Flag> flags{{"--data", "data", "measurement CSV", {}},
                          {"--model", "model", "fitted map file", {}},
                          {"--map", "map", "map table file", {}},
                          {"--image", "image", "magnitude image (PGM)", {}},
                          {"--certainty", "certainty", "certainty image (PGM)", {}},
                          {"--seed", "seed", "random seed", {}},
                          {"--z-index", "render.z_index", "z slice to render", {}}};

  const char* names[] = {"synth", "fit", "predict", "eval", "bench", "render"};
  const char* helps[] = {"draw a synthetic data set from the curl-free prior",
                         "fit a map to measurements",
                         "predict a map table on a lattice",
                         "run the synthetic accuracy study",
                         "time fits for growing data sets",
                         "render a map table as PGM rasters"};
  std::string chosen;
  for (int i = 0; i < 6; ++i) {
    CLI::App* sub = app.add_subcommand(names[i], helps[i]);
    sub->add_option("--config", config_path, "key = value configuration file");
    sub->add_option("--set", overrides, "override one key (key=value), repeatable");
    for (auto& f : flags) sub->add_option(f.name, f.value, f.help);
    sub->callback([&chosen, name = names[i]] { chosen = name; });
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    RunConfig config;
    if (!config_path.empty()) config.load_file(config_path);
    for (const auto& s : overrides) config.set(s);
    for (const auto& f : flags) {
      if (!f.value.empty()) config.set(f.key, f.value);
    }
    config.validate();

    if (chosen == "synth") return cmd_synth(config, out);
    if (chosen == "fit") return cmd_fit(config, out, err);
    if (chosen == "predict") return cmd_predict(config, out);
    if (chosen == "eval") return cmd_eval(config, out);
    if (chosen == "bench") return cmd_bench(config, out);
    return cmd_render(config, out);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const FactorizationError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const Error& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  }
}

}  // namespace magmap::cli
