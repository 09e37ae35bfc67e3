// Command-line front end: simulate | compare | pivot-trace | sweep.
// Exit codes: 0 success, 1 configuration error, 2 scenario construction
// error. All outputs embed the manifest hash for provenance.

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "structkv/baselines.hpp"
#include "structkv/manifest.hpp"
#include "structkv/metrics.hpp"
#include "structkv/scenarios.hpp"
#include "structkv/trace.hpp"

namespace fs = std::filesystem;
using namespace structkv;

namespace {

std::string format_real(Scalar v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw InternalError("format_real failed");
  return std::string(buf, ptr);
}

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::optional<std::string> policy;
  std::optional<std::uint64_t> seed;
  std::optional<Index> n_tokens;
  std::optional<Scalar> r_struct;
  std::optional<Scalar> r_kv;
  std::optional<Scalar> lambda;
  std::optional<Index> window;
  std::optional<Index> l_limit;
  std::optional<Index> fixed_pivot;
  std::optional<std::string> scenario;
  bool oracle = false;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "key=value config file");
  cmd->add_option("--out-dir", flags.out_dir, "output directory");
  cmd->add_option("--policy", flags.policy,
                  "full | recent_window | snapshot_layer | structkv");
  cmd->add_option("--seed", flags.seed, "run seed");
  cmd->add_option("--n-tokens", flags.n_tokens, "prompt length");
  cmd->add_option("--r-struct", flags.r_struct, "structural retention rate");
  cmd->add_option("--r-kv", flags.r_kv, "KV cache retention rate");
  cmd->add_option("--lambda", flags.lambda, "centrality decay factor");
  cmd->add_option("--window", flags.window, "local window size");
  cmd->add_option("--l-limit", flags.l_limit, "latest pruning layer");
  cmd->add_option("--fixed-pivot", flags.fixed_pivot,
                  "snapshot_layer pivot (default: l_limit)");
  cmd->add_option("--scenario", flags.scenario, "hub | needle | random");
  cmd->add_flag("--oracle", flags.oracle,
                "record full attention tensors (memory heavy)");
}

RunConfig resolve_config(const CommonFlags& flags) {
  RunConfig cfg;
  if (!flags.config_path.empty()) cfg = load_config_file(flags.config_path);
  if (flags.policy) cfg.policy = *flags.policy;
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.n_tokens) cfg.n_tokens = *flags.n_tokens;
  if (flags.r_struct) cfg.skv.r_struct = *flags.r_struct;
  if (flags.r_kv) cfg.skv.r_kv = *flags.r_kv;
  if (flags.lambda) cfg.skv.decay = *flags.lambda;
  if (flags.window) cfg.skv.window = *flags.window;
  if (flags.l_limit) cfg.skv.l_limit = *flags.l_limit;
  if (flags.fixed_pivot) cfg.fixed_pivot = *flags.fixed_pivot;
  if (flags.scenario) cfg.scenario = *flags.scenario;
  if (flags.oracle) cfg.oracle = true;
  cfg.validate();
  return cfg;
}

fs::path resolve_out_dir(const CommonFlags& flags) {
  if (!flags.out_dir.empty()) return flags.out_dir;
  if (const char* env = std::getenv("STRUCTKV_OUT_DIR")) return env;
  return "out";
}

ScenarioSpec scenario_spec(const RunConfig& cfg, std::uint64_t seed) {
  ScenarioSpec spec;
  spec.kind = scenario_from_string(cfg.scenario);
  spec.n_tokens = cfg.n_tokens;
  spec.seed = seed;
  spec.hub_depth = cfg.hub_depth;
  spec.band_start = cfg.band_start;
  spec.band_end = cfg.band_end;
  spec.needle_depth = cfg.needle_depth;
  return spec;
}

struct RunOutput {
  PrefillResult result;
  Scenario scenario;
};

RunOutput execute_run(const RunConfig& cfg, const std::string& policy,
                      std::uint64_t seed, bool oracle) {
  const Scenario scenario =
      generate_scenario(scenario_spec(cfg, seed), cfg.model, cfg.skv);
  ToyModel model(cfg.model, scenario.model_seed);
  if (scenario.bias) model.set_attention_bias(scenario.bias);

  PolicyOptions options;
  options.policy = policy_from_string(policy);
  options.fixed_pivot = cfg.fixed_pivot;
  options.oracle = oracle;
  RunOutput out{run_policy(model, scenario.tokens, cfg.skv, options),
                scenario};
  out.result.trace.seed = seed;
  out.result.trace.config_hash = cfg.config_hash();
  return out;
}

// Retention of the scenario's ground-truth token in the structural set;
// -1 when the scenario or the policy has no such notion.
int truth_retained(const PrefillTrace& trace, const Scenario& scenario) {
  if (scenario.truth_pos < 0) return -1;
  if (trace.pivot.pivot_layer < 0) return -1;
  return trace.i_struct.contains(scenario.truth_pos) ? 1 : 0;
}

std::string command_echo(int argc, char** argv) {
  std::ostringstream os;
  for (int i = 0; i < argc; ++i) {
    if (i > 0) os << ' ';
    os << argv[i];
  }
  return os.str();
}

void write_text(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw UsageError("cannot write: " + path.string());
  out << body;
}

int cmd_simulate(const CommonFlags& flags, const std::string& command) {
  const RunConfig cfg = resolve_config(flags);
  const fs::path out_dir = resolve_out_dir(flags);
  fs::create_directories(out_dir);

  RunManifest manifest;
  manifest.command = command;
  manifest.config_hash = cfg.config_hash();
  manifest.seeds = {cfg.seed};
  manifest.policies = {cfg.policy};
  manifest.output_paths = {(out_dir / "trace.bin").string(),
                           (out_dir / "metrics.csv").string(),
                           (out_dir / "metrics.json").string()};
  const std::uint64_t mhash = manifest.manifest_hash();

  RunOutput run = execute_run(cfg, cfg.policy, cfg.seed, cfg.oracle);
  run.result.trace.manifest_hash = mhash;

  // Fidelity against the uncompressed model when oracle mode is on.
  std::optional<FidelityReport> fidelity;
  if (cfg.oracle) {
    ToyModel model(cfg.model, run.scenario.model_seed);
    if (run.scenario.bias) model.set_attention_bias(run.scenario.bias);
    PolicyOptions full_opts;
    full_opts.policy = PolicyId::full;
    full_opts.oracle = true;
    const PrefillResult full =
        run_policy(model, run.scenario.tokens, cfg.skv, full_opts);
    fidelity = recovery_report(full.trace, run.result.trace);
    run.result.trace.has_recovery = true;
    run.result.trace.recovery_per_layer = fidelity->per_layer;
  }

  save_trace(run.result.trace, (out_dir / "trace.bin").string());
  save_cache(run.result.cache, (out_dir / "cache.bin").string());

  const FlopReport flops = flop_report(run.result.trace);
  std::string csv = flop_csv(flops, mhash);
  if (fidelity) csv += recovery_csv(*fidelity, mhash);
  write_text(out_dir / "metrics.csv", csv);

  nlohmann::json j;
  j["manifest_hash"] = mhash;
  j["config_hash"] = cfg.config_hash();
  j["policy"] = cfg.policy;
  j["seed"] = cfg.seed;
  j["n_tokens"] = cfg.n_tokens;
  j["pivot_layer"] = run.result.trace.pivot.pivot_layer;
  j["triggered_by_limit"] = run.result.trace.pivot.triggered_by_limit;
  j["struct_kept"] = run.result.trace.i_struct.size();
  j["total_flop_ratio"] = flops.total_ratio;
  j["post_pivot_attention_ratio"] = flops.post_pivot_attention_ratio;
  j["truth_retained"] = truth_retained(run.result.trace, run.scenario);
  if (fidelity) j["recovery_mean"] = fidelity->mean;
  write_text(out_dir / "metrics.json", j.dump(2) + "\n");

  manifest.save((out_dir / "manifest.json").string());
  std::cout << "wrote " << (out_dir / "manifest.json").string() << "\n";
  return 0;
}

int cmd_compare(const CommonFlags& flags, const std::string& policies_arg,
                std::uint64_t seed_begin, std::uint64_t seed_count,
                const std::string& command) {
  const RunConfig cfg = resolve_config(flags);
  const fs::path out_dir = resolve_out_dir(flags);
  fs::create_directories(out_dir);

  std::vector<std::string> policies;
  std::stringstream ss(policies_arg);
  std::string token;
  while (std::getline(ss, token, ',')) {
    policy_from_string(token);  // fail fast on unknown names
    policies.push_back(token);
  }
  if (policies.empty()) throw ConfigError("compare: no policies given");

  RunManifest manifest;
  manifest.command = command;
  manifest.config_hash = cfg.config_hash();
  for (std::uint64_t s = 0; s < seed_count; ++s) {
    manifest.seeds.push_back(seed_begin + s);
  }
  manifest.policies = policies;
  manifest.output_paths = {(out_dir / "compare.csv").string()};
  const std::uint64_t mhash = manifest.manifest_hash();

  std::ostringstream csv;
  csv << "# manifest_hash=" << mhash << "\n";
  csv << "policy,seed,n_tokens,pivot_layer,struct_kept,kv_kept_mean,"
         "truth_retained,recovery_mean,post_pivot_attention_ratio,"
         "total_flop_ratio\n";

  struct Agg {
    Scalar retained = 0, retained_n = 0, recovery = 0, ratio = 0, runs = 0;
  };
  std::vector<Agg> aggregates(policies.size());

  for (std::size_t p = 0; p < policies.size(); ++p) {
    for (std::uint64_t s = 0; s < seed_count; ++s) {
      const std::uint64_t seed = seed_begin + s;
      RunOutput run = execute_run(cfg, policies[p], seed, cfg.oracle);

      Scalar kv_mean = 0.0;
      for (const auto& rec : run.result.trace.layers) {
        kv_mean += static_cast<Scalar>(rec.kv_indices.size());
      }
      kv_mean /= static_cast<Scalar>(run.result.trace.layers.size());

      Scalar recovery_mean = -1.0;
      if (cfg.oracle) {
        ToyModel model(cfg.model, run.scenario.model_seed);
        if (run.scenario.bias) model.set_attention_bias(run.scenario.bias);
        PolicyOptions full_opts;
        full_opts.policy = PolicyId::full;
        full_opts.oracle = true;
        const PrefillResult full =
            run_policy(model, run.scenario.tokens, cfg.skv, full_opts);
        recovery_mean = recovery_report(full.trace, run.result.trace).mean;
      }

      const FlopReport flops = flop_report(run.result.trace);
      const int retained = truth_retained(run.result.trace, run.scenario);
      csv << policies[p] << "," << seed << "," << cfg.n_tokens << ","
          << run.result.trace.pivot.pivot_layer << ","
          << run.result.trace.i_struct.size() << "," << format_real(kv_mean)
          << "," << retained << "," << format_real(recovery_mean) << ","
          << format_real(flops.post_pivot_attention_ratio) << ","
          << format_real(flops.total_ratio) << "\n";

      auto& agg = aggregates[p];
      agg.runs += 1;
      agg.ratio += flops.total_ratio;
      if (retained >= 0) {
        agg.retained += retained;
        agg.retained_n += 1;
      }
      if (recovery_mean >= 0) agg.recovery += recovery_mean;
    }
  }

  csv << "# aggregate means per policy\n";
  csv << "policy,runs,truth_retention_rate,recovery_mean,total_flop_ratio\n";
  for (std::size_t p = 0; p < policies.size(); ++p) {
    const auto& a = aggregates[p];
    const Scalar rate = a.retained_n > 0 ? a.retained / a.retained_n : -1.0;
    const Scalar rec = cfg.oracle ? a.recovery / a.runs : -1.0;
    csv << policies[p] << "," << a.runs << "," << format_real(rate) << ","
        << format_real(rec) << "," << format_real(a.ratio / a.runs) << "\n";
  }

  write_text(out_dir / "compare.csv", csv.str());
  manifest.save((out_dir / "manifest.json").string());
  std::cout << "wrote " << (out_dir / "compare.csv").string() << "\n";
  return 0;
}

int cmd_pivot_trace(const CommonFlags& flags, const std::string& command) {
  const RunConfig cfg = resolve_config(flags);
  const fs::path out_dir = resolve_out_dir(flags);
  fs::create_directories(out_dir);

  RunManifest manifest;
  manifest.command = command;
  manifest.config_hash = cfg.config_hash();
  manifest.seeds = {cfg.seed};
  manifest.policies = {"full"};
  manifest.output_paths = {(out_dir / "pivot_trace.csv").string()};
  const std::uint64_t mhash = manifest.manifest_hash();

  // Full-length run so every layer's metrics are comparable; the transition
  // series is then normalized offline over all layers.
  RunOutput run = execute_run(cfg, "full", cfg.seed, false);
  std::vector<LayerMetrics> metrics;
  for (const auto& rec : run.result.trace.layers) metrics.push_back(rec.metrics);
  const Vec t = transition_scores(metrics, cfg.skv.w1, cfg.skv.w2, cfg.skv.w3);
  const PivotDecision offline = detect_pivot_offline(t, cfg.skv.l_limit);

  std::ostringstream csv;
  csv << "# manifest_hash=" << mhash << "\n";
  csv << "layer,entropy,sparsity,variance,transition,pivot\n";
  for (std::size_t l = 0; l < metrics.size(); ++l) {
    const auto& m = metrics[l];
    csv << l << "," << format_real(m.entropy) << "," << format_real(m.sparsity)
        << "," << format_real(m.variance) << ",";
    if (l >= 1) csv << format_real(t[static_cast<Index>(l)]);
    csv << "," << (static_cast<Index>(l) == offline.pivot_layer ? 1 : 0)
        << "\n";
  }
  write_text(out_dir / "pivot_trace.csv", csv.str());
  manifest.save((out_dir / "manifest.json").string());
  std::cout << "wrote " << (out_dir / "pivot_trace.csv").string() << "\n";
  return 0;
}

int cmd_sweep(const CommonFlags& flags, const std::string& r_struct_grid,
              const std::string& r_kv_grid, std::uint64_t seed_begin,
              std::uint64_t seed_count, const std::string& command) {
  const RunConfig cfg = resolve_config(flags);
  const fs::path out_dir = resolve_out_dir(flags);
  fs::create_directories(out_dir);

  const auto parse_grid = [](const std::string& arg) {
    std::vector<Scalar> grid;
    std::stringstream ss(arg);
    std::string token;
    while (std::getline(ss, token, ',')) grid.push_back(std::stod(token));
    if (grid.empty()) throw ConfigError("sweep: empty grid");
    return grid;
  };
  const auto rs_grid = parse_grid(r_struct_grid);
  const auto rk_grid = parse_grid(r_kv_grid);

  RunManifest manifest;
  manifest.command = command;
  manifest.config_hash = cfg.config_hash();
  for (std::uint64_t s = 0; s < seed_count; ++s) {
    manifest.seeds.push_back(seed_begin + s);
  }
  manifest.policies = {"structkv"};
  manifest.output_paths = {(out_dir / "sweep.csv").string()};
  const std::uint64_t mhash = manifest.manifest_hash();

  std::ostringstream csv;
  csv << "# manifest_hash=" << mhash << "\n";
  csv << "r_struct,r_kv,seed,pivot_layer,struct_kept,i_struct_hash,"
         "kv_kept_mean,post_pivot_attention_ratio\n";
  for (const Scalar rs : rs_grid) {
    for (const Scalar rk : rk_grid) {
      for (std::uint64_t s = 0; s < seed_count; ++s) {
        const std::uint64_t seed = seed_begin + s;
        RunConfig local = cfg;
        local.skv.r_struct = rs;
        local.skv.r_kv = rk;
        RunOutput run = execute_run(local, "structkv", seed, false);

        Scalar kv_mean = 0.0;
        for (const auto& rec : run.result.trace.layers) {
          kv_mean += static_cast<Scalar>(rec.kv_indices.size());
        }
        kv_mean /= static_cast<Scalar>(run.result.trace.layers.size());
        const FlopReport flops = flop_report(run.result.trace);

        // The i_struct hash exposes the decoupling: rows along the r_kv
        // axis repeat the same hash.
        const auto& idx = run.result.trace.i_struct.indices;
        const std::uint64_t ih =
            fnv1a64(idx.data(), idx.size() * sizeof(Index));
        csv << format_real(rs) << "," << format_real(rk) << "," << seed << ","
            << run.result.trace.pivot.pivot_layer << ","
            << run.result.trace.i_struct.size() << "," << ih << ","
            << format_real(kv_mean) << ","
            << format_real(flops.post_pivot_attention_ratio) << "\n";
      }
    }
  }
  write_text(out_dir / "sweep.csv", csv.str());
  manifest.save((out_dir / "manifest.json").string());
  std::cout << "wrote " << (out_dir / "sweep.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"StructKV desk-scale compression engine"};
  app.require_subcommand(1);

  CommonFlags sim_flags, cmp_flags, piv_flags, swp_flags;
  std::string policies = "full,structkv";
  std::string rs_grid = "0.1,0.2,0.3,0.4";
  std::string rk_grid = "0.05,0.1,0.2,0.4";
  std::uint64_t cmp_seed_begin = 0, cmp_seed_count = 4;
  std::uint64_t swp_seed_begin = 0, swp_seed_count = 2;

  auto* sim = app.add_subcommand("simulate", "run one policy on one scenario");
  add_common_flags(sim, sim_flags);

  auto* cmp = app.add_subcommand("compare", "grid of policies x seeds");
  add_common_flags(cmp, cmp_flags);
  cmp->add_option("--policies", policies, "comma-separated policy list");
  cmp->add_option("--seed-begin", cmp_seed_begin, "first seed");
  cmp->add_option("--seeds", cmp_seed_count, "number of seeds");

  auto* piv = app.add_subcommand("pivot-trace", "per-layer metric CSV");
  add_common_flags(piv, piv_flags);

  auto* swp = app.add_subcommand("sweep", "decoupling grid r_struct x r_kv");
  add_common_flags(swp, swp_flags);
  swp->add_option("--r-struct-grid", rs_grid, "comma-separated rates");
  swp->add_option("--r-kv-grid", rk_grid, "comma-separated rates");
  swp->add_option("--seed-begin", swp_seed_begin, "first seed");
  swp->add_option("--seeds", swp_seed_count, "number of seeds");

  CLI11_PARSE(app, argc, argv);
  const std::string command = command_echo(argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(sim_flags, command);
    if (cmp->parsed()) {
      return cmd_compare(cmp_flags, policies, cmp_seed_begin, cmp_seed_count,
                         command);
    }
    if (piv->parsed()) return cmd_pivot_trace(piv_flags, command);
    if (swp->parsed()) {
      return cmd_sweep(swp_flags, rs_grid, rk_grid, swp_seed_begin,
                       swp_seed_count, command);
    }
  } catch (const ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
