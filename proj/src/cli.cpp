#include "lossdisc/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "lossdisc/experiments.hpp"
#include "lossdisc/io.hpp"

namespace lossdisc::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kSchemaVersion = 1;

struct LoadedConfig {
  json doc;
  fs::path dir;      // directory of the config file; relative paths resolve here
  std::string hash;  // fnv1a64 of the raw file bytes
};

LoadedConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file '" + path + "'");
  }
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string raw = buf.str();
  LoadedConfig out;
  try {
    out.doc = json::parse(raw);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  out.dir = fs::absolute(fs::path(path)).parent_path();
  out.hash = hash_hex(fnv1a64(raw));
  return out;
}

fs::path resolve(const LoadedConfig& cfg, const std::string& p) {
  const fs::path candidate(p);
  return candidate.is_absolute() ? candidate : cfg.dir / candidate;
}

json load_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open referenced file '" + path.string() + "'");
  }
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("file '" + path.string() + "' is not valid JSON: " +
                      e.what());
  }
}

// A config value that is either an inline object or a path to a JSON file.
json inline_or_file(const LoadedConfig& cfg, const json& value) {
  if (value.is_string()) {
    return load_json_file(resolve(cfg, value.get<std::string>()));
  }
  return value;
}

PopulationSpec population_from_config(const LoadedConfig& cfg) {
  if (!cfg.doc.contains("population")) {
    throw ConfigError("config requires a 'population' entry");
  }
  try {
    return inline_or_file(cfg, cfg.doc.at("population")).get<PopulationSpec>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad population spec: ") + e.what());
  }
}

ShiftScenario scenario_from_config(const LoadedConfig& cfg) {
  try {
    return inline_or_file(cfg, cfg.doc.at("scenario")).get<ShiftScenario>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad shift scenario: ") + e.what());
  }
}

Dataset dataset_from_config(const LoadedConfig& cfg) {
  const json& d = cfg.doc.at("dataset");
  CsvSchema schema;
  try {
    schema.target_column = d.at("target").get<std::string>();
    schema.group_column = d.at("group").get<std::string>();
    for (const auto& [key, value] : d.at("group_mapping").items()) {
      schema.group_mapping[key] = value.get<int>();
    }
    return load_dataset_csv(resolve(cfg, d.at("path").get<std::string>()).string(),
                            schema);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad dataset entry: ") + e.what());
  }
}

fs::path output_dir(const LoadedConfig& cfg) {
  const std::string dir = cfg.doc.value("output_dir", std::string("."));
  const fs::path out = resolve(cfg, dir);
  fs::create_directories(out);
  return out;
}

std::uint64_t seed_from_config(const LoadedConfig& cfg) {
  return cfg.doc.value("seed", 0ULL);
}

json metadata_json(const std::string& command, std::uint64_t seed,
                   const std::string& config_hash) {
  return json{{"schema_version", kSchemaVersion},
              {"command", command},
              {"seed", seed},
              {"config_hash", config_hash},
              {"generator", kRngName},
              {"tolerances",
               json{{"spd_symmetry", kSymmetryTol},
                    {"quad_max_depth", kQuadMaxDepth},
                    {"lp_feasibility", kLpFeasibilityTol},
                    {"lp_pivot", kLpPivotTol}}}};
}

void write_metadata_lines(std::ostream& os, const std::string& command,
                          std::uint64_t seed, const std::string& config_hash) {
  os << "# schema_version=" << kSchemaVersion << '\n';
  os << "# command=" << command << '\n';
  os << "# seed=" << seed << '\n';
  os << "# config_hash=" << config_hash << '\n';
  os << "# generator=" << kRngName << '\n';
  os << "# tolerances spd_symmetry=" << format_double(kSymmetryTol)
     << " quad_max_depth=" << kQuadMaxDepth
     << " lp_feasibility=" << format_double(kLpFeasibilityTol)
     << " lp_pivot=" << format_double(kLpPivotTol) << '\n';
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream os(path);
  if (!os) {
    throw ConfigError("cannot write output file '" + path.string() + "'");
  }
  return os;
}

void write_json_file(const fs::path& path, const json& doc) {
  std::ofstream os = open_output(path);
  os << doc.dump(2) << '\n';
}

const char* mode_name(Mode m) {
  return m == Mode::NoGroup ? "no_group" : "with_group";
}

int jobs_override = 1;

int effective_jobs(const LoadedConfig& cfg) {
  const int cfg_jobs = cfg.doc.value("jobs", 1);
  return std::max(jobs_override, cfg_jobs);
}

// ---------------------------------------------------------------------------
// analytic

int cmd_analytic(const std::string& config_path) {
  const LoadedConfig cfg = load_config(config_path);
  const PopulationSpec pop = population_from_config(cfg);
  const fs::path out_dir = output_dir(cfg);
  const std::uint64_t seed = seed_from_config(cfg);

  json doc;
  doc["metadata"] = metadata_json("analytic", seed, cfg.hash);
  doc["lambda"] = mat_to_json(lambda_no_group(pop).lambda);
  doc["lambda_prime"] = mat_to_json(lambda_with_group(pop).lambda);
  doc["predictors"] = json{{"no_group", fit_population_no_group(pop)},
                           {"with_group", fit_population_with_group(pop)}};
  doc["reports"] = json{{"no_group", analytic_report_no_group(pop)},
                        {"with_group", analytic_report_with_group(pop)}};
  doc["expected_squared_error_no_group"] = expected_squared_error_no_group(pop);
  doc["infinite_noise_reports"] =
      json{{"no_group", infinite_noise_report(pop, Mode::NoGroup)},
           {"with_group", infinite_noise_report(pop, Mode::WithGroup)}};
  write_json_file(out_dir / "analytic.json", doc);
  std::cout << "wrote " << (out_dir / "analytic.json").string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// sweeps

SweepOptions sweep_options_from_config(const LoadedConfig& cfg, SweepKind kind,
                                       Eigen::Index dim) {
  SweepOptions opt;
  opt.repetitions = cfg.doc.value("repetitions", 100);
  opt.sample_n = cfg.doc.value("sample_n", 2000ULL);
  opt.standardize = cfg.doc.value("standardize", true);
  opt.seed = seed_from_config(cfg);
  opt.jobs = effective_jobs(cfg);
  if (kind == SweepKind::Noise) {
    if (!cfg.doc.contains("noise_grid")) {
      throw ConfigError("sweep-noise requires a 'noise_grid' array");
    }
    opt.noise_grid = cfg.doc.at("noise_grid").get<std::vector<double>>();
  } else {
    if (cfg.doc.contains("omit_counts")) {
      opt.omit_counts = cfg.doc.at("omit_counts").get<std::vector<int>>();
    } else {
      for (int k = 0; k <= dim; ++k) {
        opt.omit_counts.push_back(k);
      }
    }
    if (cfg.doc.contains("omit_order")) {
      opt.omit_order = cfg.doc.at("omit_order").get<std::vector<int>>();
    }
  }
  return opt;
}

void write_sweep_files(const fs::path& out_dir, const std::string& command,
                       std::uint64_t seed, const std::string& config_hash,
                       const SweepResult& result) {
  const char* kind = result.kind == SweepKind::Noise ? "noise" : "omit";
  {
    std::ofstream os = open_output(out_dir / "sweep_rows.csv");
    write_metadata_lines(os, command, seed, config_hash);
    if (!result.omit_order.empty()) {
      os << "# omit_order=";
      for (std::size_t i = 0; i < result.omit_order.size(); ++i) {
        os << (i ? "," : "") << result.omit_order[i];
      }
      os << '\n';
    }
    os << "kind,grid,rep,mode,sld_res,sld_sq,signed_sld_res,mse,beta_g\n";
    for (const SweepRow& r : result.rows) {
      os << kind << ',' << format_double(r.grid_value) << ',' << r.rep << ','
         << mode_name(r.mode) << ',' << format_double(r.sld_res) << ','
         << format_double(r.sld_sq) << ',' << format_double(r.signed_sld_res)
         << ',' << format_double(r.mse) << ',' << format_double(r.beta_g)
         << '\n';
    }
  }
  {
    std::ofstream os = open_output(out_dir / "sweep_aggregates.csv");
    write_metadata_lines(os, command, seed, config_hash);
    os << "kind,grid,mode,reps,mean_sld_res,se_sld_res,mean_sld_sq,se_sld_sq,"
          "mean_signed_sld_res,se_signed_sld_res,mean_mse,mean_beta_g,"
          "analytic_sld_res,analytic_sld_sq\n";
    for (const SweepAggregate& a : result.aggregates) {
      os << kind << ',' << format_double(a.grid_value) << ','
         << mode_name(a.mode) << ',' << a.reps << ','
         << format_double(a.mean_sld_res) << ',' << format_double(a.se_sld_res)
         << ',' << format_double(a.mean_sld_sq) << ','
         << format_double(a.se_sld_sq) << ','
         << format_double(a.mean_signed_sld_res) << ','
         << format_double(a.se_signed_sld_res) << ','
         << format_double(a.mean_mse) << ',' << format_double(a.mean_beta_g)
         << ',';
      if (a.has_analytic) {
        os << format_double(a.analytic_sld_res) << ','
           << format_double(a.analytic_sld_sq);
      } else {
        os << ',';
      }
      os << '\n';
    }
  }
}

int cmd_sweep(const std::string& config_path, SweepKind kind) {
  const LoadedConfig cfg = load_config(config_path);
  const std::string command =
      kind == SweepKind::Noise ? "sweep-noise" : "sweep-omit";
  const fs::path out_dir = output_dir(cfg);
  const std::uint64_t seed = seed_from_config(cfg);

  SweepResult result;
  if (cfg.doc.contains("population")) {
    const PopulationSpec pop = population_from_config(cfg);
    result = run_sweep(pop, kind, sweep_options_from_config(cfg, kind, pop.dim()));
  } else if (cfg.doc.contains("dataset")) {
    const Dataset ds = dataset_from_config(cfg);
    result = run_sweep(ds, kind, sweep_options_from_config(cfg, kind, ds.dim()));
  } else {
    throw ConfigError(command + " requires a 'population' or 'dataset' entry");
  }
  write_sweep_files(out_dir, command, seed, cfg.hash, result);
  std::cout << "wrote " << (out_dir / "sweep_rows.csv").string() << " and "
            << (out_dir / "sweep_aggregates.csv").string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// shift

ShiftExperimentOptions shift_options_from_config(const LoadedConfig& cfg) {
  ShiftExperimentOptions opt;
  opt.max_k = cfg.doc.value("max_k", 10);
  opt.repetitions = cfg.doc.value("repetitions", 100);
  opt.batch_n = cfg.doc.value("batch_n", 1000ULL);
  opt.test_n = cfg.doc.value("test_n", 20000ULL);
  opt.seed = seed_from_config(cfg);
  opt.jobs = effective_jobs(cfg);
  return opt;
}

void write_shift_files(const fs::path& out_dir, std::uint64_t seed,
                       const std::string& config_hash,
                       const ShiftExperimentResult& result) {
  {
    std::ofstream os = open_output(out_dir / "shift_rows.csv");
    write_metadata_lines(os, "shift", seed, config_hash);
    os << "K,t,rep,mode,signed_sld_res,sld_res,se,mse\n";
    for (const ShiftRow& r : result.rows) {
      os << r.k << ',' << format_double(r.t) << ',' << r.rep << ','
         << mode_name(r.mode) << ',' << format_double(r.signed_sld_res) << ','
         << format_double(r.sld_res) << ',' << format_double(r.se) << ','
         << format_double(r.mse) << '\n';
    }
  }
  {
    std::ofstream os = open_output(out_dir / "shift_aggregates.csv");
    write_metadata_lines(os, "shift", seed, config_hash);
    os << "K,t,reps,sld_with_group,se_with_group,sld_no_group,se_no_group,"
          "analytic,lower,upper\n";
    for (const ShiftAggregate& a : result.aggregates) {
      os << a.k << ',' << format_double(a.t) << ',' << a.reps << ','
         << format_double(a.sld_with_group) << ','
         << format_double(a.se_with_group) << ','
         << format_double(a.sld_no_group) << ',' << format_double(a.se_no_group)
         << ',';
      if (a.has_analytic) {
        os << format_double(a.analytic) << ',' << format_double(a.lower) << ','
           << format_double(a.upper);
      } else {
        os << ",,";
      }
      os << '\n';
    }
  }
}

int cmd_shift(const std::string& config_path) {
  const LoadedConfig cfg = load_config(config_path);
  const fs::path out_dir = output_dir(cfg);
  const std::uint64_t seed = seed_from_config(cfg);
  const ShiftExperimentOptions opt = shift_options_from_config(cfg);

  if (cfg.doc.contains("scenario")) {
    const ShiftScenario sc = scenario_from_config(cfg);
    {
      const PersistenceCurve curve = persistence_curve(sc, opt.max_k);
      std::ofstream os = open_output(out_dir / "persistence.csv");
      write_metadata_lines(os, "shift", seed, cfg.hash);
      os << "t,K,sld,lower,upper,sld_no_group\n";
      for (const auto& e : curve.entries) {
        os << format_double(e.t) << ',' << e.k << ','
           << format_double(e.sld_with_group) << ',' << format_double(e.lower)
           << ',' << format_double(e.upper) << ','
           << format_double(e.sld_no_group) << '\n';
      }
    }
    if (opt.repetitions >= 1) {
      write_shift_files(out_dir, seed, cfg.hash, run_shift_experiment(sc, opt));
    }
    std::cout << "wrote " << (out_dir / "persistence.csv").string() << '\n';
    return 0;
  }
  if (cfg.doc.contains("dataset")) {
    Dataset ds = dataset_from_config(cfg);
    if (cfg.doc.value("standardize", true)) {
      ds = standardize(ds, ds).first;
    }
    const ReweightResult rw = reweight_dataset(ds);
    if (rw.solution.status != LpStatus::Optimal) {
      throw IterationLimit("shift: reweighting LP did not reach an optimum");
    }
    write_shift_files(out_dir, seed, cfg.hash,
                      run_shift_experiment(ds, rw.row_weights, opt));
    std::cout << "wrote " << (out_dir / "shift_rows.csv").string() << '\n';
    return 0;
  }
  throw ConfigError("shift requires a 'scenario' or 'dataset' entry");
}

// ---------------------------------------------------------------------------
// reweight

int cmd_reweight(const std::string& config_path) {
  const LoadedConfig cfg = load_config(config_path);
  const fs::path out_dir = output_dir(cfg);
  const std::uint64_t seed = seed_from_config(cfg);
  if (!cfg.doc.contains("dataset")) {
    throw ConfigError("reweight requires a 'dataset' entry");
  }
  Dataset ds = dataset_from_config(cfg);
  if (cfg.doc.value("standardize", false)) {
    ds = standardize(ds, ds).first;
  }
  const LpProblem lp = build_reweight_lp(ds);
  const ReweightResult rw = reweight_dataset(ds);

  if (cfg.doc.value("dump_lp", false)) {
    std::ofstream os = open_output(out_dir / "lp_debug.txt");
    os << lp_debug_format(lp);
  }

  const char* status = rw.solution.status == LpStatus::Optimal ? "optimal"
                       : rw.solution.status == LpStatus::Infeasible
                           ? "infeasible"
                           : "unbounded";
  {
    std::ofstream os = open_output(out_dir / "weights.csv");
    write_metadata_lines(os, "reweight", seed, cfg.hash);
    os << "# status=" << status
       << " objective=" << format_double(rw.solution.objective_value) << '\n';
    os << "row_index,weight\n";
    for (Eigen::Index i = 0; i < rw.row_weights.size(); ++i) {
      os << i << ',' << format_double(rw.row_weights(i)) << '\n';
    }
  }

  // Weighted group moments before and after, for a quick equalization check.
  json summary;
  summary["metadata"] = metadata_json("reweight", seed, cfg.hash);
  summary["status"] = status;
  summary["objective"] = rw.solution.objective_value;
  for (const bool weighted : {false, true}) {
    double mass[2] = {0.0, 0.0};
    Vec mean[2] = {Vec::Zero(ds.dim()), Vec::Zero(ds.dim())};
    double ymean[2] = {0.0, 0.0};
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
      const int g = ds.group[static_cast<std::size_t>(i)];
      const double w = weighted ? rw.row_weights(i) : 1.0;
      mass[g] += w;
      mean[g] += w * ds.features.row(i).transpose();
      ymean[g] += w * ds.target(i);
    }
    json block;
    for (int g = 0; g < 2; ++g) {
      const double m = mass[g] > 0.0 ? mass[g] : 1.0;
      block["group" + std::to_string(g)] =
          json{{"mass", mass[g]},
               {"feature_mean", vec_to_json(Vec(mean[g] / m))},
               {"target_mean", ymean[g] / m}};
    }
    summary[weighted ? "reweighted" : "original"] = block;
  }
  write_json_file(out_dir / "reweight_summary.json", summary);
  std::cout << "wrote " << (out_dir / "weights.csv").string() << " ("
            << status << ")\n";
  return rw.solution.status == LpStatus::Optimal ? 0 : 3;
}

// ---------------------------------------------------------------------------
// mc-validate

int cmd_mc_validate(int specs, std::uint64_t samples, std::uint64_t seed,
                    int jobs, const std::string& csv_path) {
  McValidateOptions opt;
  opt.num_specs = specs;
  opt.samples = samples;
  opt.seed = seed;
  opt.jobs = std::max(jobs, jobs_override);
  const McValidateResult result = run_mc_validation(opt);

  for (const McCheck& c : result.checks) {
    std::cout << (c.pass ? "PASS" : "FAIL") << " spec=" << c.spec_index
              << " d=" << c.dim << " metric=" << c.metric
              << " analytic=" << format_double(c.analytic)
              << " empirical=" << format_double(c.empirical)
              << " tol=" << format_double(c.tolerance) << '\n';
  }
  std::cout << "mc-validate: "
            << (result.checks.size() - static_cast<std::size_t>(result.failures))
            << '/' << result.checks.size() << " checks passed\n";

  if (!csv_path.empty()) {
    std::ofstream os = open_output(csv_path);
    std::ostringstream opts_line;
    opts_line << "specs=" << specs << " samples=" << samples << " seed=" << seed;
    write_metadata_lines(os, "mc-validate", seed,
                         hash_hex(fnv1a64(opts_line.str())));
    os << "spec,dim,metric,analytic,empirical,tolerance,pass\n";
    for (const McCheck& c : result.checks) {
      os << c.spec_index << ',' << c.dim << ',' << c.metric << ','
         << format_double(c.analytic) << ',' << format_double(c.empirical)
         << ',' << format_double(c.tolerance) << ',' << (c.pass ? 1 : 0)
         << '\n';
    }
  }
  return result.failures == 0 ? 0 : 3;
}

}  // namespace

int run(int argc, const char* const* argv) {
  jobs_override = 1;  // reset for repeated in-process invocations
  CLI::App app{
      "Loss-discrepancy analysis for linear regression under feature noise: "
      "closed forms, Monte-Carlo validation, covariate-shift persistence, "
      "and LP reweighting"};
  app.require_subcommand(1);
  app.add_option("--jobs", jobs_override, "Worker threads for repetitions")
      ->capture_default_str();

  std::string config_path;
  const auto add_config = [&config_path](CLI::App* sub) {
    sub->fallthrough();  // let the global --jobs appear after the subcommand
    sub->add_option("--config", config_path, "JSON config file")->required();
  };

  CLI::App* analytic = app.add_subcommand(
      "analytic", "Closed-form predictors and discrepancy reports");
  add_config(analytic);
  CLI::App* sweep_noise = app.add_subcommand(
      "sweep-noise", "Equal-noise sweep over a variance grid");
  add_config(sweep_noise);
  CLI::App* sweep_omit = app.add_subcommand(
      "sweep-omit", "Sequential feature-omission sweep");
  add_config(sweep_omit);
  CLI::App* shift = app.add_subcommand(
      "shift", "Covariate-shift persistence experiment");
  add_config(shift);
  CLI::App* reweight = app.add_subcommand(
      "reweight", "Group-mean-equalizing LP weights for a dataset");
  add_config(reweight);

  CLI::App* mc = app.add_subcommand(
      "mc-validate", "Analytic-vs-Monte-Carlo oracle suite");
  mc->fallthrough();
  int mc_specs = 20;
  std::uint64_t mc_samples = 1'000'000;
  std::uint64_t mc_seed = McValidateOptions{}.seed;
  int mc_jobs = 1;
  std::string mc_csv;
  mc->add_option("--specs", mc_specs, "Number of random populations")
      ->capture_default_str();
  mc->add_option("--samples", mc_samples, "Monte-Carlo sample size")
      ->capture_default_str();
  mc->add_option("--seed", mc_seed, "Master seed")->capture_default_str();
  mc->add_option("--mc-jobs", mc_jobs, "Worker threads")->capture_default_str();
  mc->add_option("--output", mc_csv, "Optional CSV output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (analytic->parsed()) return cmd_analytic(config_path);
    if (sweep_noise->parsed()) return cmd_sweep(config_path, SweepKind::Noise);
    if (sweep_omit->parsed()) return cmd_sweep(config_path, SweepKind::Omit);
    if (shift->parsed()) return cmd_shift(config_path);
    if (reweight->parsed()) return cmd_reweight(config_path);
    if (mc->parsed()) {
      return cmd_mc_validate(mc_specs, mc_samples, mc_seed, mc_jobs, mc_csv);
    }
    throw ConfigError("no subcommand selected");
  } catch (const ConfigError& e) {
    std::cerr << "error: config: " << e.what() << '\n';
    return 2;
  } catch (const InvalidSpec& e) {
    std::cerr << "error: config: " << e.what() << '\n';
    return 2;
  } catch (const InvalidInput& e) {
    std::cerr << "error: config: " << e.what() << '\n';
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "error: config: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: numeric: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace lossdisc::cli
