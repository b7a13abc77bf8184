// caci_sim: run budgeted crowdsensing auction experiments from JSON configs.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "caci/caci.hpp"
#include "caci/config.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig  = 2;
constexpr int kExitRuntime = 3;

struct GlobalOptions
{
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  std::string out;
  bool emit_traces = false;
};

std::string num(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string output_dir(const GlobalOptions &g)
{
  if (!g.out.empty())
    return g.out;
  if (const char *env = std::getenv("CACI_BENCH_OUT"); env != nullptr && *env != '\0')
    return env;
  return "caci_out";
}

void write_file(const fs::path &path, const std::string &content)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot write " + path.string());
  out << content;
}

caci::ExperimentConfig load(const std::string &path, const GlobalOptions &g)
{
  auto cfg = caci::load_experiment_config(path);
  if (g.seed)
    cfg.seed = *g.seed;
  return cfg;
}

int cmd_run(const std::string &config_path, const GlobalOptions &g)
{
  caci::ExperimentConfig cfg;
  try
  {
    cfg = load(config_path, g);
    // Build point 0 once so population errors surface as config errors before any output.
    (void)caci::point_setup(cfg, cfg.points.empty() ? cfg.budget : cfg.points.front());
  }
  catch (const caci::ConfigError &e)
  {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  try
  {
    caci::SweepOptions opts;
    opts.jobs        = g.jobs;
    opts.keep_traces = g.emit_traces;
    const auto result = caci::sweep(cfg, opts);

    const fs::path dir = output_dir(g);
    fs::create_directories(dir);
    const auto hash = caci::hex_digest(caci::config_hash(cfg));

    std::ostringstream csv;
    csv << "mechanism,axis,axis_value,trial,cumulative_reward_realized,cumulative_reward_expected,regret_expected,"
           "slots_executed,budget_spent,explore_budget,d,seed\n";
    for (const auto &r : result.records)
    {
      csv << r.mechanism << ',' << caci::axis_name(result.axis) << ',' << num(r.axis_value) << ',' << r.trial << ','
          << num(r.reward_realized) << ',' << num(r.reward_expected) << ',' << num(r.regret_expected) << ','
          << r.slots_executed << ',' << num(r.budget_spent) << ',' << num(r.explore_budget) << ',' << r.d << ','
          << r.seed << '\n';
    }
    write_file(dir / "results.csv", csv.str());

    std::ostringstream summary;
    summary << "config_hash " << hash << "\nmode " << caci::mode_name(cfg.mode) << "\nseed " << cfg.seed
            << "\ntrials " << cfg.trials << "\naxis " << caci::axis_name(result.axis) << "\n\n";
    summary << "mechanism axis_value mean_expected std_expected mean_regret std_regret mean_realized\n";
    for (const auto &c : result.cells)
    {
      char line[256];
      std::snprintf(line, sizeof line, "%s %g %.6g %.6g %.6g %.6g %.6g\n", c.mechanism.c_str(), c.axis_value,
                    c.mean_expected, c.std_expected, c.mean_regret, c.std_regret, c.mean_realized);
      summary << line;
    }
    write_file(dir / "summary.txt", summary.str());
    write_file(dir / "config.resolved.json", caci::to_json(cfg).dump(2) + "\n");

    if (g.emit_traces)
    {
      for (const auto &r : result.records)
      {
        if (r.trace)
        {
          write_file(dir / ("trace_" + r.mechanism + "_" + std::to_string(r.point) + "_" + std::to_string(r.trial) +
                            ".csv"),
                     r.trace->to_csv());
        }
      }
      if (cfg.mode == caci::Mode::offline && cfg.population.type == caci::PopulationKind::synthetic)
      {
        const auto setup = caci::point_setup(cfg, result.points.front());
        const auto pop   = caci::build_population(cfg.mode, setup.population, setup.auction.b_max,
                                                  caci::population_seed(cfg, 0));
        write_file(dir / "population.csv",
                   caci::pool_to_csv(*std::get<std::shared_ptr<const caci::OfflinePool>>(pop)));
      }
    }
    std::cout << summary.str() << "wrote " << dir.string() << '\n';
    return 0;
  }
  catch (const caci::ConfigError &e)
  {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  catch (const caci::ParseError &e)
  {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitConfig;
  }
  catch (const std::exception &e)
  {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

std::vector<double> parse_grid(const std::string &spec)
{
  const auto a = spec.find(':');
  const auto b = spec.find(':', a == std::string::npos ? a : a + 1);
  if (a == std::string::npos || b == std::string::npos)
    throw caci::ConfigError("--grid", "expected lo:hi:n");
  char *end       = nullptr;
  const double lo = std::strtod(spec.substr(0, a).c_str(), &end);
  const double hi = std::strtod(spec.substr(a + 1, b - a - 1).c_str(), &end);
  const long n    = std::strtol(spec.substr(b + 1).c_str(), &end, 10);
  if (n < 1 || !(lo <= hi))
    throw caci::ConfigError("--grid", "expected lo <= hi and n >= 1");
  return caci::linear_grid(lo, hi, static_cast<std::size_t>(n));
}

int cmd_probe(const std::string &config_path, std::uint64_t worker, const std::string &grid_spec,
              const std::string &mechanism, const GlobalOptions &g)
{
  caci::ExperimentConfig cfg;
  std::vector<double> grid;
  caci::MechanismSpec spec;
  caci::PointSetup setup;
  caci::Population population;
  try
  {
    cfg   = load(config_path, g);
    grid  = parse_grid(grid_spec);
    spec  = mechanism.empty() ? cfg.mechanisms.front() : caci::MechanismSpec::parse(mechanism, cfg.auction.epsilon);
    setup = caci::point_setup(cfg, cfg.points.empty() ? cfg.budget : cfg.points.front());
    population = caci::build_population(cfg.mode, setup.population, setup.auction.b_max, caci::population_seed(cfg, 0));
    for (double b : grid)
    {
      if (!(b >= setup.auction.b_min && b <= setup.auction.b_max))
        throw caci::ConfigError("--grid", "grid bids must lie in [b_min, b_max]");
    }
  }
  catch (const caci::ConfigError &e)
  {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  catch (const caci::ParseError &e)
  {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitConfig;
  }
  caci::TruthProbeResult probe;
  try
  {
    probe = caci::probe_truthfulness(spec, population, setup.auction, setup.budget, worker, grid, cfg.seed);
  }
  catch (const caci::InvalidParameter &e)
  {
    std::cerr << "probe error: " << e.what() << '\n';
    return kExitConfig;
  }
  catch (const std::exception &e)
  {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
  try
  {
    caci::MechanismConfig mcfg = setup.auction;
    mcfg.record_slots          = true;
    const auto truthful = caci::run_trial(spec, population, mcfg, setup.budget, cfg.seed);
    const auto ir       = caci::audit_individual_rationality(truthful, population);

    const fs::path dir = output_dir(g);
    fs::create_directories(dir);
    std::ostringstream csv;
    csv << "bid,utility,selected\n";
    for (std::size_t i = 0; i < probe.bids.size(); ++i)
    {
      csv << num(probe.bids[i]) << ',' << num(probe.utilities[i]) << ',' << (probe.selected[i] ? 1 : 0) << '\n';
    }
    write_file(dir / "truthprobe.csv", csv.str());
    std::printf("mechanism %s worker %llu cost %.6g\n", spec.label().c_str(),
                static_cast<unsigned long long>(probe.worker_id), probe.true_cost);
    std::printf("truthful utility %.6g, critical bid %.6g, max deviation gain %.3g, single step %s\n",
                probe.truthful_utility, probe.critical_payment, probe.max_gain, probe.single_step ? "yes" : "no");
    std::printf("IR audit: %llu selections, %zu violations\n", static_cast<unsigned long long>(ir.checked),
                ir.violations.size());
    std::printf("wrote %s\n", (dir / "truthprobe.csv").string().c_str());
    return 0;
  }
  catch (const std::exception &e)
  {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

int cmd_validate(const std::string &config_path, const GlobalOptions &g)
{
  try
  {
    const auto cfg = load(config_path, g);
    const std::vector<double> values = cfg.points.empty() ? std::vector<double>{cfg.budget} : cfg.points;
    std::printf("config ok: mode %s, %zu mechanisms, %zu points, %zu trials, hash %s\n", caci::mode_name(cfg.mode),
                cfg.mechanisms.size(), values.size(), cfg.trials, caci::hex_digest(caci::config_hash(cfg)).c_str());
    for (double v : values)
    {
      const auto setup = caci::point_setup(cfg, v);
      const auto &a    = setup.auction;
      const std::uint64_t d =
        a.granularity ? *a.granularity : caci::compute_granularity(setup.budget, a.hoelder, setup.population.dim);
      const caci::PartitionGrid grid(setup.population.dim, d);
      const double bs = caci::explore_budget(setup.budget, a.b_max, a.mu_max, d, setup.population.dim);
      const double slots = std::floor(bs / (static_cast<double>(a.k) * a.b_max));
      std::printf("%s=%g: B=%g d=%llu d^M=%llu B#=%.6g exploration_slots=%.0f alpha=%g L=%g\n",
                  caci::axis_name(cfg.axis), v, setup.budget, static_cast<unsigned long long>(d),
                  static_cast<unsigned long long>(grid.cell_count()), bs, slots, a.hoelder.alpha, a.hoelder.L);
    }
    return 0;
  }
  catch (const caci::ConfigError &e)
  {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  catch (const caci::InvalidParameter &e)
  {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Budgeted context-aware crowdsensing auction simulator"};
  app.require_subcommand(1);
  GlobalOptions g;
  std::uint64_t seed = 0;
  auto *seed_opt     = app.add_option("--seed", seed, "Override the config seed");
  app.add_option("--jobs", g.jobs, "Parallel trial workers (0 = all cores)");
  app.add_option("--out", g.out, "Output directory (default $CACI_BENCH_OUT or ./caci_out)");
  app.add_flag("--emit-traces", g.emit_traces, "Write per-trial trace CSVs and population.csv");

  std::string config_path;
  auto *run = app.add_subcommand("run", "Run the configured sweep");
  run->add_option("config", config_path, "Experiment config (JSON)")->required();

  auto *probe = app.add_subcommand("probe", "Bid-sweep truthfulness probe for one worker");
  std::uint64_t worker = 0;
  std::string grid     = "0.2:1.0:100";
  std::string mechanism;
  probe->add_option("config", config_path, "Experiment config (JSON)")->required();
  probe->add_option("--worker", worker, "Worker id to probe")->required();
  probe->add_option("--grid", grid, "Bid grid lo:hi:n");
  probe->add_option("--mechanism", mechanism, "Mechanism to probe (default: first in config)");

  auto *validate = app.add_subcommand("validate", "Check a config and print the derived parameters");
  validate->add_option("config", config_path, "Experiment config (JSON)")->required();

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError &e)
  {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  if (*seed_opt)
    g.seed = seed;

  if (*run)
    return cmd_run(config_path, g);
  if (*probe)
    return cmd_probe(config_path, worker, grid, mechanism, g);
  return cmd_validate(config_path, g);
}
