#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dynsamp/chernoff.hpp"
#include "dynsamp/cluster.hpp"
#include "dynsamp/error.hpp"
#include "dynsamp/io.hpp"
#include "dynsamp/rng.hpp"
#include "dynsamp/sampling.hpp"
#include "dynsamp/sbm.hpp"
#include "dynsamp/stats.hpp"

namespace dynsamp {

struct ExperimentConfig {
  Eigen::MatrixXd b;
  Eigen::VectorXd pi;
  std::size_t n = 0;
  double p0 = 0.0;
  std::vector<double> p1;
  int trials = 1;
  std::uint64_t seed = 0;
  bool has_seed = false;
  int workers = 1;
  int grid = 100;    // scheme-curve resolution
  int p_grid = 50;   // scale-curve resolution
  std::string out_dir = ".";
  std::string edge_list;
  std::string labels;
  bool truth_from_full_graph = false;
  SamplingConfig sampling;
  bool k_range_set = false;
};

namespace detail {

inline void parse_config_json(const nlohmann::json& j, ExperimentConfig& cfg) {
  static const char* known[] = {
      "b",        "pi",       "n",           "p0",         "p1",        "trials",
      "seed",     "workers",  "grid",        "p_grid",     "out",       "edge_list",
      "labels",   "truth_from_full_graph",   "k_min",      "k_max",     "restarts",
      "max_iters", "tol",     "ridge_scale", "max_rank",   "elbow_index",
      "dense_threshold",      "grid_points", "t_tol",      "tie_tol"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    const bool ok = std::any_of(std::begin(known), std::end(known),
                                [&it](const char* k) { return it.key() == k; });
    if (!ok) fail(errc::bad_config, "unknown config key \"" + it.key() + "\"");
  }
  if (j.contains("b")) {
    const auto& rows = j.at("b");
    const auto r = rows.size();
    cfg.b.resize(r, r);
    for (std::size_t i = 0; i < r; ++i) {
      if (rows[i].size() != r) fail(errc::bad_config, "\"b\" must be a square matrix");
      for (std::size_t c = 0; c < r; ++c) cfg.b(i, c) = rows[i][c].get<double>();
    }
  }
  if (j.contains("pi")) {
    const auto& v = j.at("pi");
    cfg.pi.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) cfg.pi(i) = v[i].get<double>();
  }
  if (j.contains("n")) cfg.n = j.at("n").get<std::size_t>();
  if (j.contains("p0")) cfg.p0 = j.at("p0").get<double>();
  if (j.contains("p1")) {
    cfg.p1.clear();
    if (j.at("p1").is_array())
      for (const auto& v : j.at("p1")) cfg.p1.push_back(v.get<double>());
    else
      cfg.p1.push_back(j.at("p1").get<double>());
  }
  if (j.contains("trials")) cfg.trials = j.at("trials").get<int>();
  if (j.contains("seed")) {
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.has_seed = true;
  }
  if (j.contains("workers")) cfg.workers = j.at("workers").get<int>();
  if (j.contains("grid")) cfg.grid = j.at("grid").get<int>();
  if (j.contains("p_grid")) cfg.p_grid = j.at("p_grid").get<int>();
  if (j.contains("out")) cfg.out_dir = j.at("out").get<std::string>();
  if (j.contains("edge_list")) cfg.edge_list = j.at("edge_list").get<std::string>();
  if (j.contains("labels")) cfg.labels = j.at("labels").get<std::string>();
  if (j.contains("truth_from_full_graph"))
    cfg.truth_from_full_graph = j.at("truth_from_full_graph").get<bool>();
  if (j.contains("k_min")) {
    cfg.sampling.k_min = j.at("k_min").get<int>();
    cfg.k_range_set = true;
  }
  if (j.contains("k_max")) {
    cfg.sampling.k_max = j.at("k_max").get<int>();
    cfg.k_range_set = true;
  }
  if (j.contains("restarts")) cfg.sampling.gmm.restarts = j.at("restarts").get<int>();
  if (j.contains("max_iters")) cfg.sampling.gmm.max_iters = j.at("max_iters").get<int>();
  if (j.contains("tol")) cfg.sampling.gmm.tol = j.at("tol").get<double>();
  if (j.contains("ridge_scale")) cfg.sampling.gmm.ridge_scale = j.at("ridge_scale").get<double>();
  if (j.contains("max_rank")) cfg.sampling.embed.max_rank = j.at("max_rank").get<int>();
  if (j.contains("elbow_index")) cfg.sampling.embed.elbow_index = j.at("elbow_index").get<int>();
  if (j.contains("dense_threshold"))
    cfg.sampling.embed.dense_threshold = j.at("dense_threshold").get<int>();
  if (j.contains("grid_points")) cfg.sampling.opt.grid_points = j.at("grid_points").get<int>();
  if (j.contains("t_tol")) cfg.sampling.opt.t_tol = j.at("t_tol").get<double>();
  if (j.contains("tie_tol")) cfg.sampling.opt.tie_tol = j.at("tie_tol").get<double>();
}

}  // namespace detail

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::file_error, "cannot open config: " + path);
  ExperimentConfig cfg;
  try {
    nlohmann::json j;
    in >> j;
    detail::parse_config_json(j, cfg);
  } catch (const nlohmann::json::exception& e) {
    fail(errc::bad_config, std::string("config parse error: ") + e.what());
  }
  return cfg;
}

namespace detail {

inline void require_model(const ExperimentConfig& cfg) {
  if (cfg.b.rows() == 0 || cfg.pi.size() == 0)
    fail(errc::bad_config, "config must provide \"b\" and \"pi\"");
  make_block_model(cfg.b, cfg.pi);  // validates
}

inline void require_seed(const ExperimentConfig& cfg) {
  if (!cfg.has_seed)
    fail(errc::bad_config, "a master seed is required (config \"seed\" or --seed)");
}

inline void require_sweep(const ExperimentConfig& cfg) {
  if (!(cfg.p0 > 0.0 && cfg.p0 < 1.0)) fail(errc::bad_config, "p0 must lie in (0,1)");
  if (cfg.p1.empty()) fail(errc::bad_config, "at least one p1 value is required");
  for (double p1 : cfg.p1)
    if (!(p1 >= 0.0 && p1 < 1.0 - cfg.p0))
      fail(errc::bad_config, "p1 = " + format_double(p1) + " must lie in [0, 1 - p0)");
  if (cfg.trials < 1) fail(errc::bad_config, "trials must be >= 1");
  if (cfg.workers < 1) fail(errc::bad_config, "workers must be >= 1");
}

// Runs fn(0..tasks-1), fanning out over a fixed-size thread pool; the first
// exception wins and cancels the remaining tasks.
template <typename Fn>
void run_parallel(std::size_t tasks, int workers, Fn&& fn) {
  if (workers <= 1 || tasks <= 1) {
    for (std::size_t i = 0; i < tasks; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error = nullptr;
  std::mutex error_mu;
  auto loop = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        next.store(tasks);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int extra = std::min<int>(workers, static_cast<int>(tasks)) - 1;
  pool.reserve(extra);
  for (int w = 0; w < extra; ++w) pool.emplace_back(loop);
  loop();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

struct TrialRecord {
  int trial = 0;
  std::uint64_t seed = 0;
  int algorithm = 0;
  double p0 = 0.0;
  double p1 = 0.0;
  double ari_value = 0.0;
  int k_hat = 0;
  int d_hat = 0;
  std::string flags;
  double runtime_ms = 0.0;
};

inline std::string outcome_flags(const SamplingOutcome& o) {
  std::string f;
  const auto add = [&f](const char* tok) {
    if (!f.empty()) f += ';';
    f += tok;
  };
  if (o.fallback_uniform) add("fallback");
  if (o.shortfall) add("shortfall");
  if (o.k_range_clamped) add("kclamp");
  return f;
}

// Paired run of both algorithms on one (graph, E0, p1) instance. The two
// algorithms always see identical inputs apart from their own seed stream.
inline std::array<TrialRecord, 2> run_paired_trial(const ObservedGraph& truth, const EdgeList& e0,
                                                   double p0, double p1, std::size_t p1_idx,
                                                   int trial, std::uint64_t master,
                                                   const SamplingConfig& sampling) {
  std::array<TrialRecord, 2> out;
  for (int algo = 1; algo <= 2; ++algo) {
    const std::uint64_t algo_seed =
        derive_seed(master, {3, static_cast<std::uint64_t>(p1_idx),
                             static_cast<std::uint64_t>(trial), static_cast<std::uint64_t>(algo)});
    const auto t0 = std::chrono::steady_clock::now();
    const SamplingOutcome res = algo == 1
                                    ? algorithm1_uniform(truth, e0, p1, algo_seed, sampling)
                                    : algorithm2_chernoff(truth, e0, p1, algo_seed, sampling);
    const auto t1 = std::chrono::steady_clock::now();
    TrialRecord& rec = out[algo - 1];
    rec.trial = trial;
    rec.seed = algo_seed;
    rec.algorithm = algo;
    rec.p0 = p0;
    rec.p1 = p1;
    rec.ari_value = ari(truth.labels, res.tau_hat);
    rec.k_hat = res.k_hat;
    rec.d_hat = res.d_hat;
    rec.flags = outcome_flags(res);
    rec.runtime_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  }
  return out;
}

inline void write_trials_csv(const std::string& path, const std::vector<TrialRecord>& records) {
  CsvFile csv(path, {"trial", "seed", "algorithm", "p0", "p1", "ari", "k_hat", "d_hat", "flags"});
  for (const TrialRecord& r : records)
    csv.row({std::to_string(r.trial), std::to_string(r.seed), std::to_string(r.algorithm),
             format_double(r.p0), format_double(r.p1), format_double(r.ari_value),
             std::to_string(r.k_hat), std::to_string(r.d_hat), r.flags});
  csv.close();
}

inline void write_timings_csv(const std::string& path, const std::vector<TrialRecord>& records) {
  CsvFile csv(path, {"trial", "algorithm", "p1", "runtime_ms"});
  for (const TrialRecord& r : records)
    csv.row({std::to_string(r.trial), std::to_string(r.algorithm), format_double(r.p1),
             format_double(r.runtime_ms)});
  csv.close();
}

struct SummaryRow {
  int algorithm = 0;
  double p1 = 0.0;
  int trials = 0;
  double mean = 0.0;
  double stderr_mean = 0.0;
};

inline std::vector<SummaryRow> summarize(const std::vector<TrialRecord>& records,
                                         const std::vector<double>& p1_values, int trials) {
  std::vector<SummaryRow> rows;
  for (int algo = 1; algo <= 2; ++algo) {
    for (std::size_t pi1 = 0; pi1 < p1_values.size(); ++pi1) {
      SummaryRow row;
      row.algorithm = algo;
      row.p1 = p1_values[pi1];
      row.trials = trials;
      double sum = 0.0, sumsq = 0.0;
      for (const TrialRecord& r : records) {
        if (r.algorithm != algo || r.p1 != p1_values[pi1]) continue;
        sum += r.ari_value;
        sumsq += r.ari_value * r.ari_value;
      }
      row.mean = sum / trials;
      if (trials > 1) {
        const double var = std::max(0.0, (sumsq - trials * row.mean * row.mean) / (trials - 1));
        row.stderr_mean = std::sqrt(var / trials);
      }
      rows.push_back(row);
    }
  }
  return rows;
}

inline void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows) {
  CsvFile csv(path, {"algorithm", "p1", "trials", "mean_ari", "stderr_ari"});
  for (const SummaryRow& r : rows)
    csv.row({std::to_string(r.algorithm), format_double(r.p1), std::to_string(r.trials),
             format_double(r.mean), format_double(r.stderr_mean)});
  csv.close();
}

}  // namespace detail

// Tabulates the analytic curves: rho for the uniform and concentrated
// schemes over the p1 grid (scheme_curve.csv) and rho for uniformly scaled
// connectivity over a p grid including 1 (scale_curve.csv).
inline void run_theory_curve(const ExperimentConfig& cfg) {
  detail::require_model(cfg);
  if (!(cfg.p0 > 0.0 && cfg.p0 < 1.0)) fail(errc::bad_config, "p0 must lie in (0,1)");
  if (cfg.grid < 1 || cfg.p_grid < 1) fail(errc::bad_config, "grid sizes must be >= 1");
  std::filesystem::create_directories(cfg.out_dir);

  const SchemeCurve curve = scheme_curve(cfg.b, cfg.pi, cfg.p0, cfg.grid, cfg.sampling.opt);
  CsvFile scheme(cfg.out_dir + "/scheme_curve.csv",
                 {"p1", "rho_B", "rho_B0", "rho_baseline", "rho_optimal", "p1_star", "p1_max",
                  "p11_max", "active_k", "active_ell"});
  for (Eigen::Index i = 0; i < curve.p1_grid.size(); ++i)
    scheme.row({format_double(curve.p1_grid(i)), format_double(curve.rho_b),
                format_double(curve.rho_b0), format_double(curve.rho_baseline(i)),
                format_double(curve.rho_optimal(i)), format_double(curve.p1_star),
                format_double(curve.p1_max), format_double(curve.p11_max),
                std::to_string(curve.active_k + 1), std::to_string(curve.active_l + 1)});
  scheme.close();

  CsvFile scale(cfg.out_dir + "/scale_curve.csv", {"p", "rho"});
  for (int i = 1; i <= cfg.p_grid; ++i) {
    const double p = static_cast<double>(i) / cfg.p_grid;
    scale.row({format_double(p), format_double(chernoff_info(p * cfg.b, cfg.pi, cfg.sampling.opt).rho)});
  }
  scale.close();
}

// Monte-Carlo sweep on synthetic graphs: for every (p1, trial) draw a fresh
// graph and initial pair set, run both algorithms on identical inputs, and
// write per-trial plus summary CSVs. Output bytes are independent of the
// worker count.
inline void run_simulation(ExperimentConfig cfg) {
  detail::require_model(cfg);
  detail::require_seed(cfg);
  detail::require_sweep(cfg);
  if (cfg.n < 2) fail(errc::bad_config, "n must be >= 2");
  if (!cfg.k_range_set) {
    cfg.sampling.k_min = 1;
    cfg.sampling.k_max = 9;
  }
  std::filesystem::create_directories(cfg.out_dir);
  const BlockModel model = make_block_model(cfg.b, cfg.pi);

  const std::size_t tasks = cfg.p1.size() * static_cast<std::size_t>(cfg.trials);
  std::vector<std::array<detail::TrialRecord, 2>> results(tasks);
  detail::run_parallel(tasks, cfg.workers, [&](std::size_t task) {
    const std::size_t p1_idx = task / cfg.trials;
    const int trial = static_cast<int>(task % cfg.trials);
    const ObservedGraph graph = sample_sbm(
        model, cfg.n,
        derive_seed(cfg.seed, {1, p1_idx, static_cast<std::uint64_t>(trial)}));
    const EdgeList e0 = sample_initial_pairs(
        cfg.n, cfg.p0, derive_seed(cfg.seed, {2, p1_idx, static_cast<std::uint64_t>(trial)}));
    results[task] = detail::run_paired_trial(graph, e0, cfg.p0, cfg.p1[p1_idx], p1_idx, trial,
                                             cfg.seed, cfg.sampling);
  });

  std::vector<detail::TrialRecord> flat;
  flat.reserve(tasks * 2);
  for (const auto& pair : results) {
    flat.push_back(pair[0]);
    flat.push_back(pair[1]);
  }
  detail::write_trials_csv(cfg.out_dir + "/trials.csv", flat);
  detail::write_timings_csv(cfg.out_dir + "/timings.csv", flat);
  detail::write_summary_csv(cfg.out_dir + "/summary.csv",
                            detail::summarize(flat, cfg.p1, cfg.trials));
}

// Same sweep on a loaded graph. Truth labels come from a labels file, or from
// clustering the complete graph once when truth_from_full_graph is set. Also
// runs the paired one-sided signed-rank test on the ARI differences.
inline void run_real(ExperimentConfig cfg) {
  detail::require_seed(cfg);
  detail::require_sweep(cfg);
  if (cfg.edge_list.empty()) fail(errc::bad_config, "real mode requires \"edge_list\"");
  if (cfg.labels.empty() && !cfg.truth_from_full_graph)
    fail(errc::bad_config, "real mode needs a labels file or truth_from_full_graph=true");
  if (!cfg.k_range_set) {
    cfg.sampling.k_min = 1;
    cfg.sampling.k_max = 20;
  }
  std::filesystem::create_directories(cfg.out_dir);

  LoadedGraph loaded = load_edge_list(cfg.edge_list);
  write_vertex_map(cfg.out_dir + "/vertices.map", loaded.ids);
  ObservedGraph truth = std::move(loaded.graph);
  if (!cfg.labels.empty()) {
    truth.labels = load_labels(cfg.labels, loaded.id_map, truth.n);
  } else {
    Embedding emb;
    bool clamped = false;
    const MixtureFit fit =
        detail::cluster_observed(truth, cfg.sampling, derive_seed(cfg.seed, {7}), emb, clamped);
    truth.labels = fit.labels;
  }

  const std::size_t tasks = cfg.p1.size() * static_cast<std::size_t>(cfg.trials);
  std::vector<std::array<detail::TrialRecord, 2>> results(tasks);
  detail::run_parallel(tasks, cfg.workers, [&](std::size_t task) {
    const std::size_t p1_idx = task / cfg.trials;
    const int trial = static_cast<int>(task % cfg.trials);
    const EdgeList e0 = sample_initial_pairs(
        truth.n, cfg.p0, derive_seed(cfg.seed, {2, p1_idx, static_cast<std::uint64_t>(trial)}));
    results[task] = detail::run_paired_trial(truth, e0, cfg.p0, cfg.p1[p1_idx], p1_idx, trial,
                                             cfg.seed, cfg.sampling);
  });

  std::vector<detail::TrialRecord> flat;
  flat.reserve(tasks * 2);
  for (const auto& pair : results) {
    flat.push_back(pair[0]);
    flat.push_back(pair[1]);
  }
  detail::write_trials_csv(cfg.out_dir + "/trials.csv", flat);
  detail::write_timings_csv(cfg.out_dir + "/timings.csv", flat);
  detail::write_summary_csv(cfg.out_dir + "/summary.csv",
                            detail::summarize(flat, cfg.p1, cfg.trials));

  CsvFile wil(cfg.out_dir + "/wilcoxon.csv", {"p1", "n_used", "statistic", "p_value", "method"});
  const auto emit = [&wil](const std::string& scope, const std::vector<double>& deltas) {
    try {
      const WilcoxonResult r = wilcoxon_one_sided(deltas);
      wil.row({scope, std::to_string(r.n_used), format_double(r.statistic),
               format_double(r.p_value), r.exact ? "exact" : "normal"});
    } catch (const Error& e) {
      wil.row({scope, std::to_string(deltas.size()), "", "", errc_name(e.code())});
    }
  };
  std::vector<double> pooled;
  for (std::size_t p1_idx = 0; p1_idx < cfg.p1.size(); ++p1_idx) {
    std::vector<double> deltas;
    for (int trial = 0; trial < cfg.trials; ++trial) {
      const auto& pair = results[p1_idx * cfg.trials + trial];
      deltas.push_back(pair[1].ari_value - pair[0].ari_value);
    }
    pooled.insert(pooled.end(), deltas.begin(), deltas.end());
    emit(format_double(cfg.p1[p1_idx]), deltas);
  }
  emit("all", pooled);
  wil.close();
}

}  // namespace dynsamp
