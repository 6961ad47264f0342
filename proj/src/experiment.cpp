#include "uqsim/experiment.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "uqsim/csv.hpp"
#include "uqsim/digest.hpp"
#include "uqsim/errors.hpp"
#include "uqsim/methods/der.hpp"
#include "uqsim/methods/ensembles.hpp"
#include "uqsim/methods/gp.hpp"
#include "uqsim/methods/hmc.hpp"
#include "uqsim/methods/laplace.hpp"
#include "uqsim/methods/vi.hpp"
#include "uqsim/reference.hpp"
#include "uqsim/threading.hpp"

namespace uqsim {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct MethodRunOutput {
  bool valid = false;
  RunMetrics metrics;
  std::vector<UncertaintyEstimate> estimates;
  std::vector<double> mixture_means;
  std::vector<std::string> warnings;
};

struct ReferenceRunOutput {
  bool valid = false;
  RunMetrics metrics;
  std::vector<UncertaintyEstimate> estimates;
  std::vector<double> mixture_means;
  ReferenceResult result;
};

MlpConfig paper_mlp() { return MlpConfig{}; }

Dataset task_dataset(int n, std::uint64_t run_seed) {
  return generate_dataset(DgpSpec{}, n, RandomStream::derive_seed(run_seed, "dataset", n));
}

MethodRunOutput run_method_once(const ExperimentConfig& cfg, const std::string& method,
                                std::size_t size_idx, std::uint64_t run_seed,
                                const std::vector<double>& grid) {
  const int n = cfg.sample_sizes[size_idx];
  const int batch = cfg.batch_sizes[size_idx];
  const Dataset data = task_dataset(n, run_seed);
  const std::uint64_t proc_seed =
      RandomStream::derive_seed(run_seed, "method-" + method, static_cast<std::uint64_t>(n));

  PredictorPtr predictor;
  int draws = 0;

  if (method == "deep_ensemble" || method == "bootstrap_ensemble") {
    const bool bootstrap = method == "bootstrap_ensemble";
    const int members = bootstrap ? cfg.bootstrap_ensemble.members : cfg.deep_ensemble.members;
    TrainConfig tcfg;
    tcfg.learning_rate =
        bootstrap ? cfg.bootstrap_ensemble.learning_rate : cfg.deep_ensemble.learning_rate;
    tcfg.epochs = bootstrap ? cfg.bootstrap_ensemble.epochs[size_idx]
                            : cfg.deep_ensemble.epochs[size_idx];
    tcfg.batch_size = batch;
    std::vector<std::uint64_t> member_seeds;
    for (int j = 0; j < members; ++j)
      member_seeds.push_back(RandomStream::derive_seed(proc_seed, "member", j));
    predictor = bootstrap
                    ? fit_bootstrap_ensemble(data, paper_mlp(), tcfg, member_seeds,
                                             cfg.bootstrap_ensemble.fraction)
                    : fit_deep_ensemble(data, paper_mlp(), tcfg, member_seeds);
    draws = members;
  } else if (method == "mc_dropout") {
    TrainConfig tcfg;
    tcfg.learning_rate = cfg.mc_dropout.learning_rate;
    tcfg.epochs = cfg.mc_dropout.epochs;
    tcfg.batch_size = batch;
    tcfg.seed = proc_seed;
    predictor = fit_mc_dropout(data, paper_mlp(), tcfg, cfg.mc_dropout.rate);
    draws = cfg.mc_dropout.passes;
  } else if (method == "vi") {
    ViConfig vcfg;
    vcfg.learning_rate = cfg.vi.learning_rate;
    vcfg.epochs = cfg.vi.epochs;
    vcfg.burn_in_epochs = cfg.vi.burn_in;
    vcfg.beta = cfg.vi.beta;
    vcfg.train_mc = cfg.vi.train_mc;
    vcfg.test_mc = cfg.vi.test_mc;
    vcfg.batch_size = batch;
    vcfg.seed = proc_seed;
    predictor = fit_vi(data, paper_mlp(), vcfg);
    draws = cfg.vi.test_mc;
  } else if (method == "laplace") {
    LaplaceConfig lcfg;
    lcfg.map_lr = cfg.laplace.learning_rate;
    lcfg.epochs = cfg.laplace.epochs[size_idx];
    lcfg.batch_size = cfg.laplace.batch_sizes[size_idx];
    lcfg.prior_precision = cfg.laplace.prior_precision;
    lcfg.noise = cfg.laplace.noise;
    lcfg.posterior_samples = cfg.laplace.posterior_samples;
    lcfg.seed = proc_seed;
    predictor = fit_laplace(data, paper_mlp(), lcfg);
    draws = cfg.laplace.posterior_samples;
  } else if (method == "hmc") {
    HmcConfig hcfg;
    hcfg.pretrain_lr = cfg.hmc.pretrain_lr;
    hcfg.pretrain_epochs = cfg.hmc.pretrain_epochs[size_idx];
    hcfg.batch_size = cfg.hmc.batch_sizes[size_idx];
    hcfg.n_samples = cfg.hmc.n_samples;
    hcfg.step = cfg.hmc.step;
    hcfg.leapfrog_steps = cfg.hmc.leapfrog_steps;
    hcfg.burn = cfg.hmc.burn;
    hcfg.tau = cfg.hmc.tau;
    hcfg.inference_samples = cfg.hmc.inference_samples;
    hcfg.inference_burn = cfg.hmc.inference_burn;
    hcfg.seed = proc_seed;
    predictor = fit_hmc(data, paper_mlp(), hcfg);
    draws = cfg.hmc.inference_samples - cfg.hmc.inference_burn;
  } else if (method == "der") {
    DerConfig dcfg;
    dcfg.learning_rate = cfg.der.learning_rate;
    dcfg.epochs = cfg.der.epochs;
    dcfg.batch_size = batch;
    dcfg.lambda = cfg.der.lambda;
    dcfg.seed = proc_seed;
    predictor = fit_der(data, paper_mlp(), dcfg);
    draws = 1;
  } else if (method == "gp") {
    GpConfig gcfg;
    gcfg.inducing = cfg.gp.inducing;
    gcfg.learning_rate = cfg.gp.learning_rate;
    gcfg.epochs = cfg.gp.epochs;
    gcfg.default_samples = cfg.gp.samples;
    gcfg.seed = proc_seed;
    predictor = fit_hetero_gp(data, gcfg);
    draws = cfg.gp.samples;
  } else {
    throw ContractViolation("run_method_once: unknown method " + method);
  }

  MethodRunOutput out;
  out.warnings = predictor->warnings();
  out.estimates.reserve(grid.size());
  out.mixture_means.reserve(grid.size());

  if (method == "der") {
    for (double x : grid) {
      const NigParams p = *predictor->nig_at(x);
      out.estimates.push_back(der_decomposition(p));
      out.mixture_means.push_back(p.gamma);
    }
  } else {
    const auto samples = predictor->sample_grid(grid, draws);
    for (const SecondOrderSample& s : samples) {
      out.estimates.push_back(variance_decomposition(s));
      double mean = 0.0;
      for (const FirstOrderPrediction& m : s.members) mean += m.mean;
      out.mixture_means.push_back(mean / static_cast<double>(s.members.size()));
    }
  }

  out.metrics = compute_run_metrics(method, n, run_seed, grid, out.estimates, out.mixture_means,
                                    f_true, sigma2_true);
  out.valid = true;
  return out;
}

ReferenceRunOutput run_reference_once(const ExperimentConfig& cfg, std::size_t size_idx,
                                      std::uint64_t run_seed, const std::vector<double>& grid,
                                      int parallelism) {
  const int n = cfg.sample_sizes[size_idx];
  ReferenceConfig rcfg;
  rcfg.n_d = cfg.n_d;
  rcfg.n_gamma = cfg.n_gamma;
  rcfg.dataset_seeds = cfg.dataset_seeds;
  rcfg.proc_master_seed =
      RandomStream::derive_seed(run_seed, "reference", static_cast<std::uint64_t>(n));
  rcfg.mlp = paper_mlp();
  rcfg.train.learning_rate = cfg.reference.learning_rate;
  rcfg.train.epochs = cfg.reference.epochs;
  rcfg.train.batch_size = cfg.batch_sizes[size_idx];
  rcfg.parallelism = parallelism;

  ReferenceRunOutput out;
  out.result = estimate_reference(DgpSpec{}, n, rcfg, grid);
  out.estimates = out.result.estimates;
  out.mixture_means.reserve(grid.size());
  for (const ReferenceGrid& g : out.result.grids) {
    double mean = 0.0;
    for (const FirstOrderPrediction& p : g.predictions) mean += p.mean;
    out.mixture_means.push_back(mean / static_cast<double>(g.predictions.size()));
  }
  out.metrics = compute_run_metrics("reference", n, run_seed, grid, out.estimates,
                                    out.mixture_means, f_true, sigma2_true);
  out.valid = true;
  return out;
}

struct RegionKey {
  std::string method;
  int n;
  std::string side;
  bool operator<(const RegionKey& o) const {
    return std::tie(method, n, side) < std::tie(o.method, o.n, o.side);
  }
};

}  // namespace

MethodEvaluation evaluate_method(const ExperimentConfig& cfg, const std::string& method,
                                 std::size_t size_idx, std::uint64_t run_seed,
                                 const std::vector<double>& grid) {
  MethodRunOutput out = run_method_once(cfg, method, size_idx, run_seed, grid);
  MethodEvaluation eval;
  eval.metrics = std::move(out.metrics);
  eval.estimates = std::move(out.estimates);
  eval.mixture_means = std::move(out.mixture_means);
  eval.warnings = std::move(out.warnings);
  return eval;
}

ReferenceEvaluation evaluate_reference(const ExperimentConfig& cfg, std::size_t size_idx,
                                       std::uint64_t run_seed, const std::vector<double>& grid,
                                       int parallelism) {
  ReferenceRunOutput out = run_reference_once(cfg, size_idx, run_seed, grid, parallelism);
  ReferenceEvaluation eval;
  eval.metrics = std::move(out.metrics);
  eval.breakdowns = std::move(out.result.breakdowns);
  eval.estimates = std::move(out.result.estimates);
  return eval;
}

void write_reference_grid_csv(const std::string& path, const std::vector<ReferenceGrid>& grids) {
  std::vector<std::string> lines;
  lines.emplace_back("x,d_index,gamma_index,mean,variance");
  for (const ReferenceGrid& g : grids) {
    for (int d = 0; d < g.n_d; ++d)
      for (int c = 0; c < g.n_gamma; ++c) {
        const FirstOrderPrediction& p = g.at(d, c);
        lines.push_back(format_double(g.query_x) + "," + std::to_string(d) + "," +
                        std::to_string(c) + "," + format_double(p.mean) + "," +
                        format_double(p.variance));
      }
  }
  write_lines(path, lines);
}

std::vector<ReferenceGrid> read_reference_grid_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  if (table.header != std::vector<std::string>{"x", "d_index", "gamma_index", "mean", "variance"})
    throw IoError(path + ": unexpected grid header");
  std::vector<ReferenceGrid> grids;
  std::map<std::string, std::size_t> index_by_x;
  struct Cell {
    int d, g;
    FirstOrderPrediction p;
  };
  std::vector<std::vector<Cell>> cells;
  for (const auto& row : table.rows) {
    if (row.size() != 5) throw IoError(path + ": malformed grid row");
    const std::string& xs = row[0];
    auto [it, inserted] = index_by_x.try_emplace(xs, cells.size());
    if (inserted) {
      cells.emplace_back();
      grids.push_back({});
      grids.back().query_x = parse_double(xs);
    }
    Cell c;
    c.d = static_cast<int>(parse_double(row[1]));
    c.g = static_cast<int>(parse_double(row[2]));
    c.p = {parse_double(row[3]), parse_double(row[4])};
    cells[it->second].push_back(c);
  }
  for (std::size_t i = 0; i < grids.size(); ++i) {
    int n_d = 0, n_g = 0;
    for (const Cell& c : cells[i]) {
      n_d = std::max(n_d, c.d + 1);
      n_g = std::max(n_g, c.g + 1);
    }
    grids[i].n_d = n_d;
    grids[i].n_gamma = n_g;
    grids[i].predictions.assign(static_cast<std::size_t>(n_d * n_g), FirstOrderPrediction{});
    std::vector<bool> seen(static_cast<std::size_t>(n_d * n_g), false);
    for (const Cell& c : cells[i]) {
      grids[i].at(c.d, c.g) = c.p;
      seen[static_cast<std::size_t>(c.d * n_g + c.g)] = true;
    }
    for (bool s : seen)
      if (!s) throw IoError(path + ": incomplete grid at x = " + format_double(grids[i].query_x));
  }
  return grids;
}

void write_reference_report_csv(const std::string& path, const std::vector<ReferenceGrid>& grids,
                                const std::vector<EpistemicBreakdown>& breakdowns,
                                const std::vector<UncertaintyEstimate>& estimates) {
  if (grids.size() != breakdowns.size() || grids.size() != estimates.size())
    throw ContractViolation("write_reference_report_csv: length mismatch");
  std::vector<std::string> lines;
  lines.emplace_back("x,aleatoric,epistemic,procedural,data,total,bias,true_sigma2");
  for (std::size_t i = 0; i < grids.size(); ++i) {
    const double x = grids[i].query_x;
    lines.push_back(format_double(x) + "," + format_double(estimates[i].aleatoric) + "," +
                    format_double(estimates[i].epistemic) + "," +
                    format_double(breakdowns[i].procedural) + "," +
                    format_double(breakdowns[i].data) + "," + format_double(breakdowns[i].total) +
                    "," + format_double(breakdowns[i].bias) + "," +
                    format_double(sigma2_true(x)));
  }
  write_lines(path, lines);
}

RunArtifact run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.output_dir.empty()) throw ConfigError("output_dir: must be set");
  const int parallelism = cfg.parallelism > 0
                              ? cfg.parallelism
                              : std::max(1u, std::thread::hardware_concurrency());

  fs::create_directories(cfg.output_dir);
  const std::vector<double> grid = cfg.test_grid.points();

  RunArtifact artifact;
  artifact.output_dir = cfg.output_dir;

  std::vector<std::string> log_lines;
  auto log_task = [&](const std::string& key, const std::string& status, double seconds,
                      const std::string& detail) {
    std::string line = key + " " + status + " " + format_double(seconds) + "s";
    if (!detail.empty()) line += " " + detail;
    log_lines.push_back(std::move(line));
  };

  // Phase 1: independent method fits.
  struct MethodTask {
    std::string method;
    std::size_t size_idx;
    std::uint64_t run_seed;
  };
  std::vector<MethodTask> tasks;
  for (const std::string& method : cfg.methods) {
    if (method == "reference") continue;
    for (std::size_t s = 0; s < cfg.sample_sizes.size(); ++s)
      for (std::uint64_t seed : cfg.run_seeds) tasks.push_back({method, s, seed});
  }
  std::vector<MethodRunOutput> outputs(tasks.size());
  std::vector<std::string> task_errors(tasks.size());
  std::vector<double> task_seconds(tasks.size(), 0.0);

  parallel_for(tasks.size(), parallelism, [&](std::size_t i) {
    const MethodTask& t = tasks[i];
    const auto t0 = std::chrono::steady_clock::now();
    try {
      outputs[i] = run_method_once(cfg, t.method, t.size_idx, t.run_seed, grid);
    } catch (const std::exception& e) {
      task_errors[i] = e.what();
    }
    task_seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });

  std::vector<RunMetrics> all_metrics;
  // Figure series come from the first run seed.
  std::map<std::pair<std::string, int>, FigureSeries> figures;
  struct RegionAccum {
    std::vector<double> aleatoric, epistemic, bias, sigma_dist;
  };
  std::map<RegionKey, RegionAccum> regions;

  auto accumulate_regions = [&](const std::string& method, int n,
                                const std::vector<UncertaintyEstimate>& estimates,
                                const std::vector<double>& mixture_means) {
    for (const char* side : {"left", "right"}) {
      std::vector<double> xs;
      std::vector<UncertaintyEstimate> es;
      std::vector<double> ms;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const bool left = grid[i] < cfg.region_split;
        if ((side == std::string("left")) != left) continue;
        xs.push_back(grid[i]);
        es.push_back(estimates[i]);
        ms.push_back(mixture_means[i]);
      }
      if (xs.empty()) continue;
      const RunMetrics rm =
          compute_run_metrics(method, n, 0, xs, es, ms, f_true, sigma2_true);
      RegionAccum& acc = regions[{method, n, side}];
      acc.aleatoric.push_back(rm.mean_aleatoric);
      acc.epistemic.push_back(rm.mean_epistemic);
      acc.bias.push_back(rm.mean_bias);
      acc.sigma_dist.push_back(rm.mean_sigma_distance);
    }
  };

  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const MethodTask& t = tasks[i];
    const int n = cfg.sample_sizes[t.size_idx];
    const std::string key = t.method + "/N=" + std::to_string(n) +
                            "/seed=" + std::to_string(t.run_seed);
    if (!task_errors[i].empty()) {
      artifact.failures.push_back(key + ": " + task_errors[i]);
      log_task(key, "FAILED", task_seconds[i], task_errors[i]);
      continue;
    }
    const MethodRunOutput& out = outputs[i];
    all_metrics.push_back(out.metrics);
    for (const std::string& w : out.warnings) artifact.warnings.push_back(key + ": " + w);
    accumulate_regions(t.method, n, out.estimates, out.mixture_means);
    if (t.run_seed == cfg.run_seeds.front())
      figures[{t.method, n}] =
          make_figure_series(grid, out.estimates, out.mixture_means, f_true, sigma2_true);
    log_task(key, "ok", task_seconds[i], "");
  }

  // Phase 2: reference runs (internally parallel).
  const bool want_reference =
      std::find(cfg.methods.begin(), cfg.methods.end(), "reference") != cfg.methods.end();
  struct ReferenceFiles {
    std::string grid_csv;
    std::string report_csv;
  };
  std::vector<ReferenceFiles> reference_files;
  if (want_reference) {
    for (std::size_t s = 0; s < cfg.sample_sizes.size(); ++s) {
      for (std::uint64_t seed : cfg.run_seeds) {
        const int n = cfg.sample_sizes[s];
        const std::string key =
            "reference/N=" + std::to_string(n) + "/seed=" + std::to_string(seed);
        const auto t0 = std::chrono::steady_clock::now();
        try {
          const ReferenceRunOutput out = run_reference_once(cfg, s, seed, grid, parallelism);
          const double secs =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
          all_metrics.push_back(out.metrics);
          accumulate_regions("reference", n, out.estimates, out.mixture_means);
          if (seed == cfg.run_seeds.front())
            figures[{"reference", n}] =
                make_figure_series(grid, out.estimates, out.mixture_means, f_true, sigma2_true);
          for (const std::string& err : out.result.cell_errors)
            artifact.warnings.push_back(key + ": " + err);

          ReferenceFiles rf;
          rf.grid_csv = "reference_N" + std::to_string(n) + "_run" + std::to_string(seed) +
                        "_grid.csv";
          rf.report_csv = "reference_N" + std::to_string(n) + "_run" + std::to_string(seed) +
                          "_report.csv";
          write_reference_grid_csv((fs::path(cfg.output_dir) / rf.grid_csv).string(),
                                   out.result.grids);
          write_reference_report_csv((fs::path(cfg.output_dir) / rf.report_csv).string(),
                                     out.result.grids, out.result.breakdowns,
                                     out.result.estimates);
          reference_files.push_back(rf);
          log_task(key, "ok", secs, "");
        } catch (const std::exception& e) {
          const double secs =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
          artifact.failures.push_back(key + ": " + e.what());
          log_task(key, "FAILED", secs, e.what());
        }
      }
    }
  }

  // Shared datasets, one per (N, run seed).
  std::vector<std::string> dataset_files;
  for (int n : cfg.sample_sizes) {
    for (std::uint64_t seed : cfg.run_seeds) {
      const std::string name =
          "dataset_N" + std::to_string(n) + "_run" + std::to_string(seed) + ".csv";
      write_dataset_csv(task_dataset(n, seed), (fs::path(cfg.output_dir) / name).string());
      dataset_files.push_back(name);
    }
  }

  artifact.table = aggregate_runs(all_metrics);
  emit_table_csv((fs::path(cfg.output_dir) / "table1.csv").string(), artifact.table);

  // Region summary across runs.
  {
    std::vector<std::string> lines;
    lines.emplace_back("method,N,region,aleatoric_mean,epistemic_mean,bias_mean,sigma_dist_mean");
    for (const auto& [key, acc] : regions) {
      auto mean_of = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m += x;
        return m / static_cast<double>(v.size());
      };
      lines.push_back(key.method + "," + std::to_string(key.n) + "," + key.side + "," +
                      format_double(mean_of(acc.aleatoric)) + "," +
                      format_double(mean_of(acc.epistemic)) + "," +
                      format_double(mean_of(acc.bias)) + "," +
                      format_double(mean_of(acc.sigma_dist)));
    }
    write_lines((fs::path(cfg.output_dir) / "regions.csv").string(), lines);
  }

  std::vector<std::pair<std::string, std::string>> figure_files;  // (name, kind)
  for (const auto& [key, series] : figures) {
    const std::string name = "figure_" + key.first + "_" + std::to_string(key.second) + ".csv";
    emit_figure_csv((fs::path(cfg.output_dir) / name).string(), series);
    figure_files.emplace_back(name, "figure");
  }

  const std::string config_snapshot = cfg.to_json();
  {
    std::ofstream out(fs::path(cfg.output_dir) / "config.json", std::ios::binary);
    out << config_snapshot;
  }
  write_lines((fs::path(cfg.output_dir) / "run_log.txt").string(), log_lines);

  // Manifest with content checksums; every emitted file is listed.
  ordered_json manifest;
  manifest["created"] = std::chrono::duration_cast<std::chrono::seconds>(
                            std::chrono::system_clock::now().time_since_epoch())
                            .count();
  manifest["config_sha256"] = sha256_hex(config_snapshot);
  manifest["failures"] = artifact.failures;
  manifest["warnings"] = artifact.warnings;
  ordered_json files = ordered_json::array();
  auto add_file = [&](const std::string& name, const std::string& kind) {
    ordered_json f;
    f["path"] = name;
    f["kind"] = kind;
    f["sha256"] = sha256_file_hex((fs::path(cfg.output_dir) / name).string());
    f["bytes"] = static_cast<std::int64_t>(fs::file_size(fs::path(cfg.output_dir) / name));
    files.push_back(f);
    artifact.files.push_back(name);
  };
  add_file("config.json", "config");
  add_file("table1.csv", "table");
  add_file("regions.csv", "table");
  for (const auto& [name, kind] : figure_files) add_file(name, kind);
  for (const ReferenceFiles& rf : reference_files) {
    add_file(rf.grid_csv, "grid");
    add_file(rf.report_csv, "report");
  }
  for (const std::string& name : dataset_files) add_file(name, "dataset");
  add_file("run_log.txt", "log");
  manifest["files"] = files;
  {
    std::ofstream out(fs::path(cfg.output_dir) / "manifest.json", std::ios::binary);
    out << manifest.dump(2) << "\n";
  }

  return artifact;
}

VerifyReport verify_artifact(const std::string& dir) {
  VerifyReport report;
  const fs::path root(dir);
  const fs::path manifest_path = root / "manifest.json";
  if (!fs::exists(manifest_path)) {
    report.ok = false;
    report.lines.push_back("FAIL manifest.json missing");
    return report;
  }
  ordered_json manifest;
  {
    std::ifstream in(manifest_path);
    try {
      in >> manifest;
    } catch (const std::exception& e) {
      report.ok = false;
      report.lines.push_back(std::string("FAIL manifest.json unreadable: ") + e.what());
      return report;
    }
  }

  std::map<std::string, std::string> kind_of;
  for (const auto& f : manifest.at("files")) {
    const std::string name = f.at("path").get<std::string>();
    const std::string kind = f.at("kind").get<std::string>();
    kind_of[name] = kind;
    const fs::path p = root / name;
    if (!fs::exists(p)) {
      report.ok = false;
      report.lines.push_back("FAIL missing file " + name);
      continue;
    }
    const std::string sha = sha256_file_hex(p.string());
    if (sha != f.at("sha256").get<std::string>()) {
      report.ok = false;
      report.lines.push_back("FAIL checksum " + name);
    } else {
      report.lines.push_back("ok checksum " + name);
    }
  }

  // Replay the decomposition identities on every stored grid against its
  // report file.
  const double tol = 1e-9;
  auto close = [tol](double a, double b) {
    return std::fabs(a - b) <= tol * std::max({1.0, std::fabs(a), std::fabs(b)});
  };
  for (const auto& [name, kind] : kind_of) {
    if (kind != "grid") continue;
    std::string report_name = name;
    const std::size_t pos = report_name.rfind("_grid.csv");
    if (pos == std::string::npos) continue;
    report_name.replace(pos, std::string::npos, "_report.csv");
    if (!kind_of.contains(report_name)) {
      report.ok = false;
      report.lines.push_back("FAIL " + name + ": no matching report file");
      continue;
    }
    try {
      const std::vector<ReferenceGrid> grids = read_reference_grid_csv((root / name).string());
      const CsvTable stored = read_csv((root / report_name).string());
      if (stored.rows.size() != grids.size())
        throw IoError("report row count mismatch");
      bool all_ok = true;
      for (std::size_t i = 0; i < grids.size(); ++i) {
        const double x = grids[i].query_x;
        const EpistemicBreakdown b = analyze_grid(grids[i], f_true(x));
        const UncertaintyEstimate e = variance_decomposition(flatten_grid(grids[i]));
        const auto& row = stored.rows[i];
        const double s_aleatoric = parse_double(row[1]);
        const double s_epistemic = parse_double(row[2]);
        const double s_procedural = parse_double(row[3]);
        const double s_data = parse_double(row[4]);
        const double s_total = parse_double(row[5]);
        const double s_bias = parse_double(row[6]);
        const bool row_ok =
            close(parse_double(row[0]), x) && close(s_aleatoric, e.aleatoric) &&
            close(s_epistemic, e.epistemic) && close(s_procedural, b.procedural) &&
            close(s_data, b.data) && close(s_total, b.total) && close(s_bias, b.bias) &&
            close(s_procedural + s_data, s_total);
        if (!row_ok) {
          report.ok = false;
          all_ok = false;
          report.lines.push_back("FAIL identity " + name + " at x = " + format_double(x));
          break;
        }
      }
      if (all_ok) report.lines.push_back("ok identities " + name);
    } catch (const std::exception& e) {
      report.ok = false;
      report.lines.push_back("FAIL " + name + ": " + e.what());
    }
  }
  return report;
}

}  // namespace uqsim
