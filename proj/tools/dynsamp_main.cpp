#include <charconv>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dynsamp/harness.hpp"

namespace {

// Shared flag set; CLI values override whatever the config file said.
struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int workers = 0;
  double p0 = 0.0;
  std::vector<double> p1;
  int trials = 0;

  CLI::Option* out_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* workers_opt = nullptr;
  CLI::Option* p0_opt = nullptr;
  CLI::Option* p1_opt = nullptr;
  CLI::Option* trials_opt = nullptr;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file")->required();
    out_opt = cmd->add_option("--out", out_dir, "output directory");
    seed_opt = cmd->add_option("--seed", seed, "master seed (64-bit)");
    workers_opt = cmd->add_option("--workers", workers, "concurrent trial workers");
    p0_opt = cmd->add_option("--p0", p0, "initial observation rate");
    p1_opt = cmd->add_option("--p1", p1, "increment rate(s), comma separated")->delimiter(',');
    trials_opt = cmd->add_option("--trials", trials, "trials per p1 value");
  }

  dynsamp::ExperimentConfig resolve() const {
    dynsamp::ExperimentConfig cfg = dynsamp::load_config(config_path);
    if (out_opt->count()) cfg.out_dir = out_dir;
    if (seed_opt->count()) {
      cfg.seed = seed;
      cfg.has_seed = true;
    }
    if (workers_opt->count()) cfg.workers = workers;
    if (p0_opt->count()) cfg.p0 = p0;
    if (p1_opt->count()) cfg.p1 = p1;
    if (trials_opt->count()) cfg.trials = trials;
    return cfg;
  }
};

int run_test_wilcoxon(const std::string& path) {
  std::ifstream in(path);
  if (!in) dynsamp::fail(dynsamp::errc::file_error, "cannot open deltas file: " + path);
  std::vector<double> deltas;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (dynsamp::detail::is_comment_or_blank(line)) continue;
    const auto fields = dynsamp::detail::split_fields(line);
    if (fields.size() != 1)
      dynsamp::fail(dynsamp::errc::malformed_line,
                    path + ":" + std::to_string(line_no) + ": expected one value per line");
    double value = 0.0;
    const char* first = fields[0].data();
    const char* last = first + fields[0].size();
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc{} || res.ptr != last)
      dynsamp::fail(dynsamp::errc::malformed_line,
                    path + ":" + std::to_string(line_no) + ": \"" + fields[0] +
                        "\" is not a number");
    deltas.push_back(value);
  }
  const dynsamp::WilcoxonResult r = dynsamp::wilcoxon_one_sided(deltas);
  std::printf("statistic=%s\n", dynsamp::format_double(r.statistic).c_str());
  std::printf("p_value=%s\n", dynsamp::format_double(r.p_value).c_str());
  std::printf("n_used=%d\n", r.n_used);
  std::printf("method=%s\n", r.exact ? "exact" : "normal");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chernoff-guided dynamic network sampling experiments"};
  app.require_subcommand(1);

  CommonFlags theory_flags, sim_flags, real_flags;
  CLI::App* theory = app.add_subcommand("theory-curve", "tabulate analytic rho curves");
  theory_flags.attach(theory);
  CLI::App* sim = app.add_subcommand("simulate", "paired Monte-Carlo sweep on synthetic graphs");
  sim_flags.attach(sim);
  CLI::App* real = app.add_subcommand("real", "paired sweep on a loaded edge list");
  real_flags.attach(real);

  std::string deltas_path;
  CLI::App* wil = app.add_subcommand("test-wilcoxon", "one-sided signed-rank test on a delta file");
  wil->add_option("deltas", deltas_path, "file with one delta per line, # comments allowed")
      ->required();

  try {
    app.parse(argc, argv);
    if (theory->parsed()) {
      dynsamp::run_theory_curve(theory_flags.resolve());
    } else if (sim->parsed()) {
      dynsamp::run_simulation(sim_flags.resolve());
    } else if (real->parsed()) {
      dynsamp::run_real(real_flags.resolve());
    } else {
      return run_test_wilcoxon(deltas_path);
    }
    return 0;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const dynsamp::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return dynsamp::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
}
