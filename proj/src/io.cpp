#include "dora/io.hpp"

#include <fstream>
#include <set>
#include <span>
#include <sstream>

namespace dora {

namespace {

// Rejects keys outside `allowed`, naming the full path of the first offender.
void check_keys(const Json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(path + " must be a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw ConfigError("unknown key '" + (path.empty() ? key : path + "." + key) + "'");
  }
}

template <typename T>
void read_field(const Json& j, const std::string& path, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("field '" + path + "." + key + "' has the wrong type");
  }
}

void read_size(const Json& j, const std::string& path, const char* key, std::size_t& out) {
  if (!j.contains(key)) return;
  const Json& v = j.at(key);
  if (!v.is_number_unsigned()) throw ConfigError("field '" + path + "." + key + "' must be a nonnegative integer");
  out = v.get<std::size_t>();
}

template <typename T>
T required(const Json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("field '") + key + "' has the wrong type");
  }
}

const char* mode_name(ComponentMode m) {
  switch (m) {
    case ComponentMode::kTilted: return "tilted";
    case ComponentMode::kDirichlet: return "dirichlet";
    case ComponentMode::kUniform: return "uniform";
  }
  return "?";
}

ComponentMode parse_mode(const std::string& s) {
  for (ComponentMode m : {ComponentMode::kTilted, ComponentMode::kDirichlet, ComponentMode::kUniform}) {
    if (s == mode_name(m)) return m;
  }
  throw ConfigError("unknown world.mode '" + s + "'");
}

const char* encoding_name(FeatureEncoding e) { return e == FeatureEncoding::kAdditive ? "additive" : "joint"; }

FeatureEncoding parse_encoding(const std::string& s) {
  if (s == "additive") return FeatureEncoding::kAdditive;
  if (s == "joint") return FeatureEncoding::kJoint;
  throw ConfigError("unknown classifier.encoding '" + s + "'");
}

std::string csv_cell(double v) { return format_double(v); }

// Shortest round-trip decimal strings, so reloading reproduces every bit.
Json decimal_array(std::span<const double> values) {
  Json a = Json::array();
  for (double v : values) a.push_back(format_double(v));
  return a;
}

std::vector<double> parse_decimal_array(const Json& j, const char* what) {
  if (!j.is_array()) throw ConfigError(std::string(what) + " must be an array of decimal strings");
  std::vector<double> out;
  out.reserve(j.size());
  for (const Json& v : j) {
    if (!v.is_string()) throw ConfigError(std::string(what) + " must be an array of decimal strings");
    out.push_back(parse_double(v.get<std::string>()));
  }
  return out;
}

Json datum_json(const PreferenceDatum& d) {
  return Json{{"query", d.query},
              {"responses", d.responses},
              {"source_labels", d.source_labels},
              {"rewards", decimal_array(d.rewards)},
              {"ranking", d.ranking}};
}

PreferenceDatum datum_from_json(const Json& j) {
  PreferenceDatum d;
  d.query = required<std::size_t>(j, "query");
  d.responses = required<std::vector<std::size_t>>(j, "responses");
  d.source_labels = required<std::vector<std::uint8_t>>(j, "source_labels");
  d.rewards = parse_decimal_array(required<Json>(j, "rewards"), "rewards");
  d.ranking = required<std::vector<std::size_t>>(j, "ranking");
  return d;
}

}  // namespace

Json to_json(const Table& t) {
  Json rows = Json::array();
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto row = t.row(r);
    rows.push_back(decimal_array(row));
  }
  return rows;
}

Table table_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("table must be a nonempty array of rows");
  const std::size_t cols = j.front().size();
  Table t(j.size(), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    const std::vector<double> row = parse_decimal_array(j[r], "table row");
    if (row.size() != cols) throw ConfigError("table rows have unequal lengths");
    std::copy(row.begin(), row.end(), t.row(r).begin());
  }
  return t;
}

Json to_json(const World& w) {
  Json comps = Json::array();
  for (const Table& c : w.components) comps.push_back(to_json(c));
  return Json{{"query_count", w.query_count},
              {"response_count", w.response_count},
              {"n_slots", w.n_slots},
              {"components", comps},
              {"golden", to_json(w.golden)},
              {"golden_is_target", w.golden_is_target}};
}

World world_from_json(const Json& j) {
  std::vector<Table> comps;
  for (const Json& c : required<Json>(j, "components")) comps.push_back(table_from_json(c));
  const bool golden_is_target = required<bool>(j, "golden_is_target");
  World w = World::from_tables(std::move(comps), golden_is_target ? std::nullopt
                                                                  : std::optional<Table>(table_from_json(j.at("golden"))));
  return w;
}

Json to_json(const MixtureSpec& s) { return Json{{"alpha", s.alpha}, {"betas", s.betas}}; }

MixtureSpec mixture_from_json(const Json& j) {
  check_keys(j, "mixture", {"alpha", "betas"});
  MixtureSpec s;
  read_field(j, "mixture", "alpha", s.alpha);
  read_field(j, "mixture", "betas", s.betas);
  return s;
}

Json to_json(const Dataset& d) {
  Json data = Json::array();
  for (const PreferenceDatum& x : d.data) data.push_back(datum_json(x));
  return Json{{"spec", to_json(d.spec)},
              {"seed", d.seed},
              {"corruption_rate", d.corruption_rate},
              {"corrupted_indices", d.corrupted_indices},
              {"data", data}};
}

Dataset dataset_from_json(const Json& j) {
  Dataset d;
  d.spec = mixture_from_json(required<Json>(j, "spec"));
  d.seed = required<std::uint64_t>(j, "seed");
  d.corruption_rate = required<double>(j, "corruption_rate");
  d.corrupted_indices = required<std::vector<std::size_t>>(j, "corrupted_indices");
  for (const Json& x : required<Json>(j, "data")) d.data.push_back(datum_from_json(x));
  return d;
}

Json to_json(const ClassifierModel& m) {
  return Json{{"slot", m.slot},
              {"query_count", m.query_count},
              {"response_count", m.response_count},
              {"encoding", encoding_name(m.encoding)},
              {"weights", decimal_array(m.weights)},
              {"imbalance_ratio", format_double(m.imbalance_ratio)},
              {"epsilon_clamp", format_double(m.epsilon_clamp)},
              {"final_loss", format_double(m.loss_history.empty() ? 0.0 : m.loss_history.back())}};
}

ClassifierModel classifier_from_json(const Json& j) {
  ClassifierModel m;
  m.slot = required<std::size_t>(j, "slot");
  m.query_count = required<std::size_t>(j, "query_count");
  m.response_count = required<std::size_t>(j, "response_count");
  m.encoding = parse_encoding(required<std::string>(j, "encoding"));
  m.weights = parse_decimal_array(required<Json>(j, "weights"), "weights");
  m.imbalance_ratio = parse_double(required<std::string>(j, "imbalance_ratio"));
  m.epsilon_clamp = parse_double(required<std::string>(j, "epsilon_clamp"));
  m.loss_history = {parse_double(required<std::string>(j, "final_loss"))};
  if (m.weights.size() != feature_dimension(m.encoding, m.query_count, m.response_count)) {
    throw ConfigError("classifier weights do not match its feature dimension");
  }
  return m;
}

Json to_json(const PolicyModel& p) {
  return Json{{"logits", to_json(p.logits())}, {"frozen", p.frozen()}, {"seed", p.seed}, {"config_hash", p.config_hash}};
}

PolicyModel policy_from_json(const Json& j) {
  PolicyModel p(table_from_json(required<Json>(j, "logits")));
  if (required<bool>(j, "frozen")) p = p.frozen_copy();
  p.seed = required<std::uint64_t>(j, "seed");
  p.config_hash = required<std::string>(j, "config_hash");
  return p;
}

Json to_json(const ExperimentConfig& c) {
  Json strategies = Json::array();
  for (AggregatorKind k : c.sweep.strategies) strategies.push_back(std::string(to_string(k)));
  Json losses = Json::array();
  for (LossKind k : c.sweep.losses) losses.push_back(std::string(to_string(k)));
  return Json{
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"world",
       {{"query_count", c.world.query_count},
        {"response_count", c.world.response_count},
        {"n_slots", c.world.n_slots},
        {"mode", mode_name(c.world.mode)},
        {"target_sharpness", c.world.target_sharpness},
        {"synthetic_sharpness", c.world.synthetic_sharpness},
        {"target_affinity", c.world.target_affinity},
        {"synthetic_temperature", c.world.synthetic_temperature},
        {"shift", c.world.shift},
        {"min_tv", c.world.min_tv},
        {"allow_degenerate", c.world.allow_degenerate}}},
      {"mixture", to_json(c.mixture)},
      {"data", {{"size", c.dataset_size}}},
      {"classifier",
       {{"learning_rate", c.classifier.learning_rate},
        {"epochs", c.classifier.epochs},
        {"epsilon_clamp", c.classifier.epsilon_clamp},
        {"encoding", encoding_name(c.classifier.encoding)}}},
      {"sft", {{"learning_rate", c.sft.learning_rate}, {"epochs", c.sft.epochs}}},
      {"train",
       {{"loss", std::string(to_string(c.train.loss_kind))},
        {"beta", c.train.loss_params.beta},
        {"alpha_sft", c.train.loss_params.alpha_sft},
        {"temperature", c.train.loss_params.temperature},
        {"aggregator", std::string(to_string(c.train.aggregator.kind))},
        {"lambda", c.train.aggregator.lambda},
        {"step_size", c.train.step_size},
        {"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"corruption_rate", c.train.corruption_rate},
        {"early_stop_grad_norm", c.train.early_stop_grad_norm},
        {"optimizer", std::string(to_string(c.train.optimizer))}}},
      {"reward", {{"scale", c.reward.scale}, {"offset", c.reward.offset}}},
      {"eval", {{"win_queries", c.eval.win_queries}, {"slope_samples", c.eval.slope_samples}}},
      {"sweep", {{"lambdas", c.sweep.lambdas}, {"strategies", strategies}, {"losses", losses}, {"seeds", c.sweep.seeds}}},
      {"verify", {{"instances", c.verify.instances}, {"gradient_draws", c.verify.gradient_draws}}},
  };
}

ExperimentConfig experiment_config_from_json(const Json& j) {
  ExperimentConfig c;
  check_keys(j, "", {"seed", "output_dir", "world", "mixture", "data", "classifier", "sft", "train", "reward", "eval",
                     "sweep", "verify"});
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw ConfigError("field 'seed' must be a nonnegative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  read_field(j, "", "output_dir", c.output_dir);
  if (j.contains("world")) {
    const Json& w = j.at("world");
    check_keys(w, "world", {"query_count", "response_count", "n_slots", "mode", "target_sharpness",
                            "synthetic_sharpness", "target_affinity", "synthetic_temperature", "shift", "min_tv",
                            "allow_degenerate"});
    read_size(w, "world", "query_count", c.world.query_count);
    read_size(w, "world", "response_count", c.world.response_count);
    read_size(w, "world", "n_slots", c.world.n_slots);
    if (w.contains("mode")) c.world.mode = parse_mode(w.at("mode").get<std::string>());
    read_field(w, "world", "target_sharpness", c.world.target_sharpness);
    read_field(w, "world", "synthetic_sharpness", c.world.synthetic_sharpness);
    read_field(w, "world", "target_affinity", c.world.target_affinity);
    read_field(w, "world", "synthetic_temperature", c.world.synthetic_temperature);
    read_field(w, "world", "shift", c.world.shift);
    read_field(w, "world", "min_tv", c.world.min_tv);
    read_field(w, "world", "allow_degenerate", c.world.allow_degenerate);
    if (c.world.n_slots >= 2 && !j.contains("mixture")) {
      // Default mixture for a resized world: α = 0.5, the rest split evenly.
      c.mixture.betas.assign(c.world.n_slots - 1, 0.5 / static_cast<double>(c.world.n_slots - 1));
    }
  }
  if (j.contains("mixture")) c.mixture = mixture_from_json(j.at("mixture"));
  if (j.contains("data")) {
    check_keys(j.at("data"), "data", {"size"});
    read_size(j.at("data"), "data", "size", c.dataset_size);
  }
  if (j.contains("classifier")) {
    const Json& k = j.at("classifier");
    check_keys(k, "classifier", {"learning_rate", "epochs", "epsilon_clamp", "encoding"});
    read_field(k, "classifier", "learning_rate", c.classifier.learning_rate);
    read_size(k, "classifier", "epochs", c.classifier.epochs);
    read_field(k, "classifier", "epsilon_clamp", c.classifier.epsilon_clamp);
    if (k.contains("encoding")) c.classifier.encoding = parse_encoding(k.at("encoding").get<std::string>());
  }
  if (j.contains("sft")) {
    const Json& s = j.at("sft");
    check_keys(s, "sft", {"learning_rate", "epochs"});
    read_field(s, "sft", "learning_rate", c.sft.learning_rate);
    read_size(s, "sft", "epochs", c.sft.epochs);
  }
  if (j.contains("train")) {
    const Json& t = j.at("train");
    check_keys(t, "train", {"loss", "beta", "alpha_sft", "temperature", "aggregator", "lambda", "step_size", "epochs",
                            "batch_size", "corruption_rate", "early_stop_grad_norm", "optimizer"});
    if (t.contains("loss")) c.train.loss_kind = parse_loss_kind(t.at("loss").get<std::string>());
    read_field(t, "train", "beta", c.train.loss_params.beta);
    read_field(t, "train", "alpha_sft", c.train.loss_params.alpha_sft);
    read_field(t, "train", "temperature", c.train.loss_params.temperature);
    if (t.contains("aggregator")) c.train.aggregator.kind = parse_aggregator_kind(t.at("aggregator").get<std::string>());
    read_field(t, "train", "lambda", c.train.aggregator.lambda);
    read_field(t, "train", "step_size", c.train.step_size);
    read_size(t, "train", "epochs", c.train.epochs);
    read_size(t, "train", "batch_size", c.train.batch_size);
    read_field(t, "train", "corruption_rate", c.train.corruption_rate);
    read_field(t, "train", "early_stop_grad_norm", c.train.early_stop_grad_norm);
    if (t.contains("optimizer")) c.train.optimizer = parse_optimizer_kind(t.at("optimizer").get<std::string>());
  }
  if (j.contains("reward")) {
    const Json& r = j.at("reward");
    check_keys(r, "reward", {"scale", "offset"});
    read_field(r, "reward", "scale", c.reward.scale);
    read_field(r, "reward", "offset", c.reward.offset);
  }
  if (j.contains("eval")) {
    const Json& e = j.at("eval");
    check_keys(e, "eval", {"win_queries", "slope_samples"});
    read_size(e, "eval", "win_queries", c.eval.win_queries);
    read_size(e, "eval", "slope_samples", c.eval.slope_samples);
  }
  if (j.contains("sweep")) {
    const Json& s = j.at("sweep");
    check_keys(s, "sweep", {"lambdas", "strategies", "losses", "seeds"});
    read_field(s, "sweep", "lambdas", c.sweep.lambdas);
    read_field(s, "sweep", "seeds", c.sweep.seeds);
    if (s.contains("strategies")) {
      c.sweep.strategies.clear();
      for (const auto& v : s.at("strategies")) c.sweep.strategies.push_back(parse_aggregator_kind(v.get<std::string>()));
    }
    if (s.contains("losses")) {
      c.sweep.losses.clear();
      for (const auto& v : s.at("losses")) c.sweep.losses.push_back(parse_loss_kind(v.get<std::string>()));
    }
  }
  if (j.contains("verify")) {
    const Json& v = j.at("verify");
    check_keys(v, "verify", {"instances", "gradient_draws"});
    read_size(v, "verify", "instances", c.verify.instances);
    read_size(v, "verify", "gradient_draws", c.verify.gradient_draws);
  }
  c.validate();
  return c;
}

Json to_json(const EvalReport& r) {
  return Json{{"label", r.label},
              {"lambda", format_double(r.lambda)},
              {"target_kl", format_double(r.target_kl)},
              {"win_rate", format_double(r.win_rate)},
              {"lose_rate", format_double(r.lose_rate)},
              {"tie_rate", format_double(r.tie_rate)},
              {"reward_confidence_slope", format_double(r.reward_confidence_slope)},
              {"scatter_gap", format_double(r.scatter_gap)},
              {"config_hash", r.config_hash},
              {"seed", r.seed}};
}

EvalReport report_from_json(const Json& j) {
  EvalReport r;
  r.label = required<std::string>(j, "label");
  r.lambda = parse_double(required<std::string>(j, "lambda"));
  r.target_kl = parse_double(required<std::string>(j, "target_kl"));
  r.win_rate = parse_double(required<std::string>(j, "win_rate"));
  r.lose_rate = parse_double(required<std::string>(j, "lose_rate"));
  r.tie_rate = parse_double(required<std::string>(j, "tie_rate"));
  r.reward_confidence_slope = parse_double(required<std::string>(j, "reward_confidence_slope"));
  r.scatter_gap = parse_double(required<std::string>(j, "scatter_gap"));
  r.config_hash = required<std::string>(j, "config_hash");
  r.seed = required<std::uint64_t>(j, "seed");
  return r;
}

namespace {

Json reports_json(const std::vector<EvalReport>& reports) {
  Json a = Json::array();
  for (const EvalReport& r : reports) a.push_back(to_json(r));
  return a;
}

std::vector<EvalReport> reports_from_json(const Json& j) {
  if (!j.is_array()) throw ConfigError("expected an array of reports");
  std::vector<EvalReport> out;
  for (const Json& r : j) out.push_back(report_from_json(r));
  return out;
}

Json points_json(const std::vector<std::pair<double, double>>& points) {
  Json a = Json::array();
  for (const auto& [x, y] : points) a.push_back(Json::array({format_double(x), format_double(y)}));
  return a;
}

std::vector<std::pair<double, double>> points_from_json(const Json& j) {
  if (!j.is_array()) throw ConfigError("expected an array of points");
  std::vector<std::pair<double, double>> out;
  for (const Json& p : j) {
    const std::vector<double> xy = parse_decimal_array(p, "point");
    if (xy.size() != 2) throw ConfigError("a point needs two coordinates");
    out.emplace_back(xy[0], xy[1]);
  }
  return out;
}

}  // namespace

Json to_json(const SweepChunk& c) {
  return Json{{"seed", c.seed},
              {"grid", reports_json(c.grid)},
              {"strategies", reports_json(c.strategies)},
              {"erm_scatter", points_json(c.erm_scatter)},
              {"dora_scatter", points_json(c.dora_scatter)}};
}

SweepChunk chunk_from_json(const Json& j) {
  SweepChunk c;
  c.seed = required<std::uint64_t>(j, "seed");
  c.grid = reports_from_json(required<Json>(j, "grid"));
  c.strategies = reports_from_json(required<Json>(j, "strategies"));
  c.erm_scatter = points_from_json(required<Json>(j, "erm_scatter"));
  c.dora_scatter = points_from_json(required<Json>(j, "dora_scatter"));
  return c;
}

Json envelope(std::string_view kind, Json payload, const std::string& hash, std::uint64_t seed) {
  return Json{{"format_version", kFormatVersion},
              {"kind", std::string(kind)},
              {"config_hash", hash},
              {"seed", seed},
              {"payload", std::move(payload)}};
}

Json open_envelope(const Json& doc, std::string_view kind) {
  if (!doc.is_object() || doc.value("kind", std::string()) != kind) {
    throw ConfigError("expected a '" + std::string(kind) + "' document");
  }
  if (doc.value("format_version", -1) != kFormatVersion) {
    throw ConfigError("unsupported format_version in '" + std::string(kind) + "' document");
  }
  return doc.at("payload");
}

void write_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw Error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_json(const std::filesystem::path& path) {
  try {
    return Json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string csv_preamble(const std::string& hash, std::uint64_t seed) {
  return "# config_hash=" + hash + " seed=" + std::to_string(seed) + "\n";
}

std::string calibration_csv(const std::vector<CalibrationRecord>& records, const std::string& hash,
                            std::uint64_t seed) {
  std::string s = csv_preamble(hash, seed) + "index,h_tilde";
  const std::size_t n = records.empty() ? 0 : records.front().per_slot_terms.size();
  for (std::size_t j = 0; j < n; ++j) s += ",t_" + std::to_string(j);
  s += "\n";
  for (const CalibrationRecord& r : records) {
    s += std::to_string(r.datum_index) + "," + csv_cell(r.h_tilde);
    for (double t : r.per_slot_terms) s += "," + csv_cell(t);
    s += "\n";
  }
  return s;
}

std::string training_log_csv(const TrainingLog& log, const std::string& hash, std::uint64_t seed) {
  std::string s = csv_preamble(hash, seed) + "step,epoch,batch_loss,grad_norm\n";
  for (const StepRecord& r : log.steps) {
    s += std::to_string(r.step) + "," + std::to_string(r.epoch) + "," + csv_cell(r.batch_loss) + "," +
         csv_cell(r.grad_norm) + "\n";
  }
  return s;
}

std::string reports_csv(const std::vector<EvalReport>& reports, const std::string& hash, std::uint64_t seed) {
  std::string s = csv_preamble(hash, seed) +
                  "label,lambda,seed,target_kl,win_rate,lose_rate,tie_rate,reward_confidence_slope,scatter_gap,"
                  "config_hash\n";
  for (const EvalReport& r : reports) {
    s += r.label + "," + csv_cell(r.lambda) + "," + std::to_string(r.seed) + "," + csv_cell(r.target_kl) + "," +
         csv_cell(r.win_rate) + "," + csv_cell(r.lose_rate) + "," + csv_cell(r.tie_rate) + "," +
         csv_cell(r.reward_confidence_slope) + "," + csv_cell(r.scatter_gap) + "," + r.config_hash + "\n";
  }
  return s;
}

}  // namespace dora
