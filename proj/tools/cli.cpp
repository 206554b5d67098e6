#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

#include "dora/io.hpp"
#include "dora/svg.hpp"
#include "dora/verify.hpp"

namespace dora::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::size_t jobs = 1;
  bool inject_broken_aggregator = false;
  std::optional<std::size_t> stop_after;
  std::string policy_path;
};

std::uint64_t parse_seed(const std::string& text, const std::string& what) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigError(what + " must be a nonnegative integer, got '" + text + "'");
  }
  return v;
}

Json seeds_json(const ResolvedConfig& rc) {
  const SeedPlan p = plan_seeds(rc.config.seed);
  return Json{{"global", rc.config.seed},     {"source", std::string(to_string(rc.seed_source))},
              {"world", p.world},             {"data", p.data},
              {"corruption", p.corruption},   {"classifier", p.classifier},
              {"train", p.train},             {"eval", p.eval}};
}

// Collects the files a command writes so the manifest can list their hashes.
class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::string& contents) {
    write_atomic(dir_ / name, contents);
    hashes_[name] = fnv1a_hex(contents);
  }
  void write_json(const std::string& name, const Json& doc) { write(name, doc.dump(2) + "\n"); }

  const fs::path& dir() const { return dir_; }

  Json manifest(const std::string& command, const ResolvedConfig& rc) const {
    Json config = to_json(rc.config);
    config.erase("output_dir");
    Json files = Json::object();
    for (const auto& [name, hash] : hashes_) files[name] = hash;
    return Json{{"format_version", kFormatVersion},
                {"kind", "manifest"},
                {"command", command},
                {"config_hash", rc.hash},
                {"seed", rc.config.seed},
                {"seeds", seeds_json(rc)},
                {"config", config},
                {"files", files}};
  }

 private:
  fs::path dir_;
  std::map<std::string, std::string> hashes_;
};

Json read_input(const fs::path& path, std::string_view kind) {
  if (!fs::exists(path)) throw Error("missing input " + path.string() + "; run the earlier stage first");
  return open_envelope(read_json(path), kind);
}

int cmd_generate(const Options& opt, std::ostream& out) {
  const ResolvedConfig rc = resolve_config(opt.config_path, opt.seed, opt.out);
  const ExperimentConfig& c = rc.config;
  const SeedPlan seeds = plan_seeds(c.seed);
  WorldConfig wc = c.world;
  wc.seed = seeds.world;
  const World world = build_world(wc);
  const Dataset data = generate_dataset(world, c.mixture, c.dataset_size, seeds.data, make_reward_fn(world, c.reward));

  OutputSet files(c.output_dir);
  files.write_json("world.json", envelope("world", to_json(world), rc.hash, c.seed));
  files.write_json("dataset.json", envelope("dataset", to_json(data), rc.hash, c.seed));
  files.write_json("manifest.json", files.manifest("generate", rc));
  out << "generate: " << data.size() << " preference tuples over " << world.query_count << " queries x "
      << world.response_count << " responses -> " << c.output_dir << " (config " << rc.hash << ")\n";
  return kExitOk;
}

int cmd_train(const Options& opt, std::ostream& out, std::ostream& err) {
  const ResolvedConfig rc = resolve_config(opt.config_path, opt.seed, opt.out);
  const ExperimentConfig& c = rc.config;
  const fs::path dir = c.output_dir;
  World world = world_from_json(read_input(dir / "world.json", "world"));
  Dataset clean = dataset_from_json(read_input(dir / "dataset.json", "dataset"));

  const PreparedRun run = prepare_from_data(c, c.seed, std::move(world), std::move(clean));
  RunOutcome outcome;
  try {
    outcome = train_and_evaluate(run, c, c.train, cell_label(c.train.aggregator.kind, c.train.loss_kind));
  } catch (const NumericAbort& e) {
    err << "numeric abort at step " << e.step() << "; batch indices:";
    for (std::size_t i : e.indices()) err << ' ' << i;
    err << "\n";
    return kExitNumeric;
  }

  OutputSet files(dir);
  Json classifiers = Json::array();
  for (const ClassifierModel& m : run.classifiers) classifiers.push_back(to_json(m));
  files.write_json("classifiers.json", envelope("classifiers", classifiers, rc.hash, c.seed));
  files.write("calibration.csv", calibration_csv(run.calibration, rc.hash, c.seed));
  files.write_json("sft_policy.json", envelope("policy", to_json(run.sft_policy), rc.hash, c.seed));
  files.write_json("policy.json", envelope("policy", to_json(outcome.policy), rc.hash, c.seed));
  files.write("training_log.csv", training_log_csv(outcome.log, rc.hash, c.seed));
  files.write("train_report.csv", reports_csv({outcome.report}, rc.hash, c.seed));
  Json manifest = files.manifest("train", rc);
  manifest["corrupted_indices"] = run.dataset.corrupted_indices;
  manifest["steps"] = outcome.log.steps.size();
  manifest["early_stopped"] = outcome.log.early_stopped;
  manifest["report"] = to_json(outcome.report);
  files.write_json("train_manifest.json", manifest);
  out << "train: " << outcome.log.steps.size() << " steps, " << run.dataset.corrupted_indices.size()
      << " corrupted labels, target KL " << format_double(outcome.report.target_kl) << ", win rate "
      << format_double(outcome.report.win_rate) << " -> " << c.output_dir << "\n";
  return kExitOk;
}

std::string gradient_csv(const std::vector<GradientCheck>& checks, const std::string& hash, std::uint64_t seed) {
  std::string s = csv_preamble(hash, seed) + "label,draws,max_relative_error,pass\n";
  for (const GradientCheck& g : checks) {
    s += g.label + "," + std::to_string(g.draws) + "," + format_double(g.max_relative_error) + "," +
         (g.pass ? "1" : "0") + "\n";
  }
  return s;
}

int cmd_verify(const Options& opt, std::ostream& out, std::ostream& err) {
  const ResolvedConfig rc = resolve_config(opt.config_path, opt.seed, opt.out);
  const ExperimentConfig& c = rc.config;
  const std::uint64_t seed = derive_seed(c.seed, "verify");

  const DualityReport duality = check_duality(c.verify.instances, derive_seed(seed, "duality"));
  const LimitReport limits = check_lse_limits(200, derive_seed(seed, "limits"),
                                              opt.inject_broken_aggregator ? AggregateFn(broken_aggregate)
                                                                           : AggregateFn());
  const std::vector<GradientCheck> gradients = check_gradients(c.verify.gradient_draws, derive_seed(seed, "gradients"));

  OutputSet files(c.output_dir);
  files.write("oracle_gaps.csv", duality_csv(duality, rc.hash, c.seed));
  files.write("gradient_checks.csv", gradient_csv(gradients, rc.hash, c.seed));

  bool ok = duality.failures == 0 && limits.pass;
  for (const GradientCheck& g : gradients) ok = ok && g.pass;

  Json manifest = files.manifest("verify", rc);
  manifest["duality"] = Json{{"instances", duality.rows.size()},
                             {"failures", duality.failures},
                             {"max_relative_gap", format_double(duality.max_relative)},
                             {"max_tilt_error", format_double(duality.max_tilt_error)},
                             {"max_kl_error", format_double(duality.max_kl_error)}};
  manifest["limits"] = Json{{"batches", limits.batches},
                            {"max_large_lambda_error", format_double(limits.max_large_lambda_error)},
                            {"max_small_lambda_error", format_double(limits.max_small_lambda_error)},
                            {"monotonicity_violations", limits.monotonicity_violations},
                            {"pass", limits.pass}};
  Json grads = Json::array();
  for (const GradientCheck& g : gradients) {
    grads.push_back(Json{{"label", g.label}, {"max_relative_error", format_double(g.max_relative_error)}, {"pass", g.pass}});
  }
  manifest["gradients"] = grads;
  manifest["pass"] = ok;
  files.write_json("verify_manifest.json", manifest);

  out << "verify: " << duality.rows.size() << " duality instances, max relative gap "
      << format_double(duality.max_relative) << "; limit checks " << (limits.pass ? "pass" : "FAIL")
      << "; " << gradients.size() << " gradient checks\n";
  if (ok) return kExitOk;

  if (duality.failures > 0) {
    err << "duality failures on instances:";
    for (const DualityRow& r : duality.rows) {
      if (!r.pass) err << ' ' << r.id;
    }
    err << "\n";
  }
  if (!limits.pass) {
    err << "aggregator limit check failed: large-lambda error " << format_double(limits.max_large_lambda_error)
        << ", small-lambda error " << format_double(limits.max_small_lambda_error) << ", "
        << limits.monotonicity_violations << " monotonicity violations over " << limits.batches << " batches\n";
  }
  for (const GradientCheck& g : gradients) {
    if (!g.pass) err << "gradient check failed: " << g.label << " max relative error "
                     << format_double(g.max_relative_error) << "\n";
  }
  return kExitVerify;
}

// ---- sweep ----

constexpr const char* kResumeFile = "RESUME.json";
constexpr const char* kPartialDir = "partial";

fs::path chunk_path(const fs::path& dir, std::uint64_t seed) {
  return dir / kPartialDir / ("seed-" + std::to_string(seed) + ".json");
}

void write_resume(const fs::path& dir, const ResolvedConfig& rc, const std::vector<std::uint64_t>& seeds,
                  const std::vector<bool>& done) {
  Json completed = Json::array();
  Json pending = Json::array();
  for (std::size_t i = 0; i < seeds.size(); ++i) (done[i] ? completed : pending).push_back(seeds[i]);
  const Json doc{{"format_version", kFormatVersion}, {"kind", "resume"},       {"config_hash", rc.hash},
                 {"seed", rc.config.seed},           {"completed", completed}, {"pending", pending}};
  write_atomic(dir / kResumeFile, doc.dump(2) + "\n");
}

// Reuses a chunk only when it was produced under the same config hash.
std::optional<SweepChunk> load_chunk(const fs::path& dir, const ResolvedConfig& rc, std::uint64_t seed) {
  const fs::path p = chunk_path(dir, seed);
  if (!fs::exists(p)) return std::nullopt;
  try {
    const Json doc = read_json(p);
    if (doc.value("config_hash", std::string()) != rc.hash) return std::nullopt;
    SweepChunk c = chunk_from_json(open_envelope(doc, "sweep_chunk"));
    if (c.seed != seed) return std::nullopt;
    return c;
  } catch (const Error&) {
    return std::nullopt;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

struct Summary {
  double win = 0.0;
  double kl = 0.0;
  double gap = 0.0;
  double slope = 0.0;
  std::size_t n = 0;

  void add(const EvalReport& r) {
    win += r.win_rate;
    kl += r.target_kl;
    gap += r.scatter_gap;
    slope += r.reward_confidence_slope;
    ++n;
  }
  double mean(double total) const { return n ? total / static_cast<double>(n) : 0.0; }
};

void write_sweep_outputs(OutputSet& files, const ResolvedConfig& rc, const std::vector<SweepChunk>& chunks) {
  const ExperimentConfig& c = rc.config;
  const SweepConfig& sw = c.sweep;
  const std::size_t A = sw.strategies.size();
  const std::size_t K = sw.losses.size();

  std::vector<EvalReport> grid;
  for (std::size_t l = 0; l < sw.lambdas.size(); ++l) {
    for (std::size_t a = 0; a < A; ++a) {
      for (const SweepChunk& ch : chunks) grid.push_back(ch.grid[l * A + a]);
    }
  }
  std::vector<EvalReport> strategies;
  for (std::size_t a = 0; a < A; ++a) {
    for (std::size_t k = 0; k < K; ++k) {
      for (const SweepChunk& ch : chunks) strategies.push_back(ch.strategies[a * K + k]);
    }
  }
  files.write("sweep_grid.csv", reports_csv(grid, rc.hash, c.seed));
  files.write("strategy_grid.csv", reports_csv(strategies, rc.hash, c.seed));

  // λ curve: mean over seeds per (λ, strategy).
  std::string lambda_csv =
      csv_preamble(rc.hash, c.seed) +
      "lambda,strategy,loss,seeds,mean_win_rate,mean_target_kl,mean_scatter_gap,mean_reward_confidence_slope\n";
  std::vector<Series> curves(A);
  for (std::size_t a = 0; a < A; ++a) curves[a].name = std::string(to_string(sw.strategies[a]));
  for (std::size_t l = 0; l < sw.lambdas.size(); ++l) {
    for (std::size_t a = 0; a < A; ++a) {
      Summary s;
      for (const SweepChunk& ch : chunks) s.add(ch.grid[l * A + a]);
      lambda_csv += format_double(sw.lambdas[l]) + "," + curves[a].name + "," +
                    std::string(to_string(c.train.loss_kind)) + "," + std::to_string(s.n) + "," +
                    format_double(s.mean(s.win)) + "," + format_double(s.mean(s.kl)) + "," +
                    format_double(s.mean(s.gap)) + "," + format_double(s.mean(s.slope)) + "\n";
      curves[a].points.emplace_back(sw.lambdas[l], s.mean(s.win));
    }
  }
  files.write("lambda_summary.csv", lambda_csv);

  std::string strategy_csv = csv_preamble(rc.hash, c.seed) + "strategy,loss,seeds,mean_win_rate,mean_target_kl\n";
  std::vector<Bar> bars;
  for (std::size_t a = 0; a < A; ++a) {
    for (std::size_t k = 0; k < K; ++k) {
      Summary s;
      for (const SweepChunk& ch : chunks) s.add(ch.strategies[a * K + k]);
      const std::string strategy(to_string(sw.strategies[a]));
      const std::string loss(to_string(sw.losses[k]));
      strategy_csv += strategy + "," + loss + "," + std::to_string(s.n) + "," + format_double(s.mean(s.win)) + "," +
                      format_double(s.mean(s.kl)) + "\n";
      bars.push_back(Bar{loss, strategy, s.mean(s.win)});
    }
  }
  files.write("strategy_summary.csv", strategy_csv);

  ChartMeta meta;
  meta.config_hash = rc.hash;
  meta.seed = c.seed;

  meta.title = "Win rate against the target vs lambda (" + std::string(to_string(c.train.loss_kind)) + ")";
  meta.x_label = "lambda";
  meta.y_label = "mean win rate";
  meta.log_x = true;
  files.write("lambda_curve.svg", line_chart(curves, meta));

  const SweepChunk& first = chunks.front();
  meta.title = "Log-probability of preferred responses, seed " + std::to_string(first.seed);
  meta.x_label = "log prob under SFT";
  meta.y_label = "log prob after alignment";
  meta.log_x = false;
  files.write("scatter.svg", scatter_chart({Series{"erm", first.erm_scatter}, Series{"dora", first.dora_scatter}}, meta));

  meta.title = "Mean win rate by strategy and loss";
  meta.x_label = "loss";
  meta.y_label = "mean win rate";
  files.write("strategy_bars.svg", bar_chart(bars, meta));
}

int cmd_sweep(const Options& opt, std::ostream& out, std::ostream& err) {
  const ResolvedConfig rc = resolve_config(opt.config_path, opt.seed, opt.out);
  const ExperimentConfig& c = rc.config;
  const std::vector<std::uint64_t>& seeds = c.sweep.seeds;
  if (c.sweep.lambdas.empty() || c.sweep.strategies.empty() || c.sweep.losses.empty()) {
    throw ConfigError("sweep needs nonempty sweep.lambdas, sweep.strategies and sweep.losses");
  }
  const fs::path dir = c.output_dir;

  std::vector<std::optional<SweepChunk>> chunks(seeds.size());
  std::vector<bool> done(seeds.size(), false);
  std::size_t resumed = 0;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    chunks[i] = load_chunk(dir, rc, seeds[i]);
    done[i] = chunks[i].has_value();
    resumed += done[i];
  }
  if (resumed > 0) out << "sweep: resuming with " << resumed << " of " << seeds.size() << " seeds done\n";

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (!done[i]) todo.push_back(i);
  }
  const std::size_t budget = opt.stop_after.value_or(todo.size());

  std::mutex mutex;
  std::atomic<std::size_t> next{0};
  std::size_t finished = 0;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= todo.size() || t >= budget) return;
      {
        std::lock_guard<std::mutex> lock(mutex);
        if (failure) return;
      }
      const std::size_t i = todo[t];
      try {
        SweepChunk chunk = run_sweep_seed(c, seeds[i]);
        write_atomic(chunk_path(dir, seeds[i]),
                     envelope("sweep_chunk", to_json(chunk), rc.hash, c.seed).dump() + "\n");
        std::lock_guard<std::mutex> lock(mutex);
        chunks[i] = std::move(chunk);
        done[i] = true;
        ++finished;
      } catch (...) {
        std::lock_guard<std::mutex> lock(mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(opt.jobs, todo.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < jobs; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  const bool complete = std::all_of(done.begin(), done.end(), [](bool d) { return d; });
  if (!complete) {
    write_resume(dir, rc, seeds, done);
    if (failure) {
      err << "sweep: stopped after " << finished << " new seeds; rerun the same command to resume\n";
      std::rethrow_exception(failure);
    }
    err << "sweep: interrupted after " << finished << " new seeds; rerun the same command to resume\n";
    return kExitOther;
  }

  std::vector<SweepChunk> ordered;
  for (auto& ch : chunks) ordered.push_back(std::move(*ch));
  OutputSet files(dir);
  write_sweep_outputs(files, rc, ordered);
  Json manifest = files.manifest("sweep", rc);
  manifest["rows"] = Json{{"sweep_grid", c.sweep.lambdas.size() * c.sweep.strategies.size() * seeds.size()},
                          {"strategy_grid", c.sweep.strategies.size() * c.sweep.losses.size() * seeds.size()}};
  files.write_json("sweep_manifest.json", manifest);

  std::error_code ec;
  fs::remove_all(dir / kPartialDir, ec);
  fs::remove(dir / kResumeFile, ec);
  out << "sweep: " << seeds.size() << " seeds, " << manifest["rows"]["sweep_grid"].get<std::size_t>()
      << " grid rows -> " << c.output_dir << "\n";
  return kExitOk;
}

int cmd_eval(const Options& opt, std::ostream& out) {
  const ResolvedConfig rc = resolve_config(opt.config_path, opt.seed, opt.out);
  const ExperimentConfig& c = rc.config;
  const fs::path dir = c.output_dir;

  PreparedRun run;
  run.seed = c.seed;
  run.world = world_from_json(read_input(dir / "world.json", "world"));
  for (const Json& m : read_input(dir / "classifiers.json", "classifiers")) {
    run.classifiers.push_back(classifier_from_json(m));
  }
  const fs::path policy_path = opt.policy_path.empty() ? dir / "policy.json" : fs::path(opt.policy_path);
  std::vector<EvalReport> reports;
  reports.push_back(evaluate_policy(policy_from_json(read_input(policy_path, "policy")), run, c, "policy"));
  if (fs::exists(dir / "sft_policy.json")) {
    reports.push_back(evaluate_policy(policy_from_json(read_input(dir / "sft_policy.json", "policy")), run, c, "sft"));
  }

  OutputSet files(dir);
  files.write("eval_report.csv", reports_csv(reports, rc.hash, c.seed));
  Json manifest = files.manifest("eval", rc);
  Json rows = Json::array();
  for (const EvalReport& r : reports) rows.push_back(to_json(r));
  manifest["reports"] = rows;
  files.write_json("eval_manifest.json", manifest);
  out << "eval: policy win rate " << format_double(reports.front().win_rate) << ", target KL "
      << format_double(reports.front().target_kl) << "\n";
  return kExitOk;
}

}  // namespace

std::string_view to_string(SeedSource s) {
  switch (s) {
    case SeedSource::kConfig: return "config";
    case SeedSource::kEnvironment: return "env";
    case SeedSource::kFlag: return "flag";
  }
  return "?";
}

ResolvedConfig resolve_config(const std::string& path, std::optional<std::uint64_t> seed_flag,
                              const std::optional<std::string>& out_flag) {
  ResolvedConfig rc;
  if (!path.empty()) {
    if (!fs::exists(path)) throw ConfigError("config file not found: " + path);
    Json j;
    try {
      j = Json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    rc.config = experiment_config_from_json(j);
  }
  if (seed_flag) {
    rc.config.seed = *seed_flag;
    rc.seed_source = SeedSource::kFlag;
  } else if (const char* env = std::getenv("DORA_LAB_SEED"); env != nullptr && *env != '\0') {
    rc.config.seed = parse_seed(env, "DORA_LAB_SEED");
    rc.seed_source = SeedSource::kEnvironment;
  }
  if (out_flag) rc.config.output_dir = *out_flag;
  rc.config.validate();
  rc.hash = config_hash(rc.config);
  return rc;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"dora-lab: calibration-weighted KL-DRO preference alignment lab"};
  app.require_subcommand(1);
  Options opt;
  std::string seed_text;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "experiment config (JSON); defaults apply when omitted");
    sub->add_option("--seed", seed_text, "global seed; overrides DORA_LAB_SEED and the config");
    sub->add_option("--jobs", opt.jobs, "concurrent sweep seeds")->check(CLI::PositiveNumber);
    sub->add_option_function<std::string>("--out", [&](const std::string& v) { opt.out = v; },
                                           "output directory; overrides the config");
  };
  CLI::App* generate = app.add_subcommand("generate", "build the world and preference dataset");
  CLI::App* train = app.add_subcommand("train", "phase 1 classifiers, calibration, SFT and phase 2 training");
  CLI::App* verify = app.add_subcommand("verify", "duality, limit and gradient cross-checks");
  CLI::App* sweep = app.add_subcommand("sweep", "lambda x strategy x seed grid with figures");
  CLI::App* eval = app.add_subcommand("eval", "evaluate a trained policy");
  for (CLI::App* sub : {generate, train, verify, sweep, eval}) common(sub);
  verify->add_flag("--inject-broken-aggregator", opt.inject_broken_aggregator)->group("");
  sweep->add_option_function<std::size_t>("--stop-after", [&](const std::size_t& n) { opt.stop_after = n; })
      ->group("");
  eval->add_option("--policy", opt.policy_path, "policy checkpoint (default: <out>/policy.json)");

  std::vector<std::string> argv_store{"dora-lab"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (std::string& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "dora-lab: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (!seed_text.empty()) opt.seed = parse_seed(seed_text, "--seed");
    if (*generate) return cmd_generate(opt, out);
    if (*train) return cmd_train(opt, out, err);
    if (*verify) return cmd_verify(opt, out, err);
    if (*sweep) return cmd_sweep(opt, out, err);
    if (*eval) return cmd_eval(opt, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericAbort& e) {
    err << "numeric abort at step " << e.step() << ": " << e.what() << "\n";
    return kExitNumeric;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitOther;
  }
  return kExitOther;
}

}  // namespace dora::cli
