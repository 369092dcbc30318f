#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>

#include "guardian/harness.hpp"

namespace guardian::harness {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return x;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw ConfigError(key + ": integer out of range '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string policy_name(anomaly::PolicyMode m) {
  switch (m) {
    case anomaly::PolicyMode::top1_on_no_consensus: return "top1_on_no_consensus";
    case anomaly::PolicyMode::top1_always: return "top1_always";
    case anomaly::PolicyMode::threshold: return "threshold";
  }
  return "?";
}

}  // namespace

std::string to_string(sim::AttackKind kind) {
  switch (kind) {
    case sim::AttackKind::none: return "none";
    case sim::AttackKind::hallucination: return "hallucination";
    case sim::AttackKind::agent_targeted: return "agent";
    case sim::AttackKind::comm_targeted: return "comm";
  }
  return "?";
}

sim::AttackKind parse_attack(const std::string& text) {
  if (text == "none") return sim::AttackKind::none;
  if (text == "hallucination") return sim::AttackKind::hallucination;
  if (text == "agent" || text == "agent_targeted") return sim::AttackKind::agent_targeted;
  if (text == "comm" || text == "comm_targeted") return sim::AttackKind::comm_targeted;
  throw ConfigError("attack: expected none, hallucination, agent or comm, got '" + text + "'");
}

pipeline::PipelineConfig ExperimentConfig::default_pipeline() {
  pipeline::PipelineConfig pc;
  pc.detector.alpha = 0.4;
  pc.detector.set_gamma(0.005);
  return pc;
}

int ExperimentConfig::effective_min_rounds() const {
  if (min_rounds > 0) return min_rounds;
  return attack == sim::AttackKind::comm_targeted ? 3 : 1;
}

void ExperimentConfig::validate() const {
  static const std::set<double> fractions = {0.25, 0.5, 0.75, 1.0};
  if (n_agents < 1) throw ConfigError("n_agents must be >= 1");
  if (max_rounds < 1) throw ConfigError("max_rounds must be >= 1");
  if (min_rounds < 0) throw ConfigError("min_rounds must be >= 0");
  if (!fractions.contains(topology)) throw ConfigError("topology must be one of 0.25, 0.5, 0.75, 1.0");
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (corpus.empty() && tasks < 1) throw ConfigError("tasks must be >= 1");
  if (choices < 2) throw ConfigError("choices must be >= 2");
  if (p_correct < 0 || p_correct > 1 || p_follow < 0 || p_follow > 1) {
    throw ConfigError("p_correct and p_follow must be in [0,1]");
  }
  if (persuasion < 0) throw ConfigError("persuasion must be >= 0");
  if (decay.kind == DecayKind::exponential && (decay.lambda <= 0 || decay.lambda > 1)) {
    throw ConfigError("decay_lambda must be in (0,1]");
  }
  if (remote_timeout_seconds <= 0) throw ConfigError("remote_timeout_seconds must be > 0");
  try {
    pipeline.detector.validate();
    pipeline.policy.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  auto& det = cfg.pipeline.detector;
  if (key == "n_agents" || key == "agents") cfg.n_agents = parse_uint(key, v);
  else if (key == "max_rounds" || key == "rounds") cfg.max_rounds = static_cast<int>(parse_uint(key, v));
  else if (key == "min_rounds") cfg.min_rounds = static_cast<int>(parse_uint(key, v));
  else if (key == "topology") {
    cfg.topology = parse_double(key, v);
    if (cfg.topology != 0.25 && cfg.topology != 0.5 && cfg.topology != 0.75 && cfg.topology != 1.0)
      throw ConfigError("topology must be one of 0.25, 0.5, 0.75, 1.0, got '" + v + "'");
  } else if (key == "attack") cfg.attack = parse_attack(v);
  else if (key == "persuasion") cfg.persuasion = parse_double(key, v);
  else if (key == "p_correct") cfg.p_correct = parse_double(key, v);
  else if (key == "p_follow") cfg.p_follow = parse_double(key, v);
  else if (key == "role_prompt") cfg.role_prompt = v;
  else if (key == "defend") cfg.defend = parse_bool(key, v);
  else if (key == "checkpoint") cfg.checkpoint = v;
  else if (key == "corpus") cfg.corpus = v;
  else if (key == "tasks") cfg.tasks = parse_uint(key, v);
  else if (key == "choices") cfg.choices = parse_uint(key, v);
  else if (key == "trials") cfg.trials = parse_uint(key, v);
  else if (key == "seed") cfg.seed = parse_uint(key, v);
  else if (key == "decay") {
    if (v == "exponential") cfg.decay.kind = DecayKind::exponential;
    else if (v == "linear") cfg.decay.kind = DecayKind::linear;
    else throw ConfigError("decay: expected exponential or linear, got '" + v + "'");
  } else if (key == "decay_lambda") cfg.decay.lambda = parse_double(key, v);
  else if (key == "pooling") {
    if (v == "pooled") cfg.pooling = Pooling::pooled;
    else if (v == "per_episode") cfg.pooling = Pooling::per_episode;
    else throw ConfigError("pooling: expected pooled or per_episode, got '" + v + "'");
  } else if (key == "record_runtime") cfg.record_runtime = parse_bool(key, v);
  else if (key == "remote_agent_url") cfg.remote_agent_url = v;
  else if (key == "remote_agent_token") cfg.remote_agent_token = v;
  else if (key == "embedder_url") cfg.embedder_url = v;
  else if (key == "remote_timeout_seconds") cfg.remote_timeout_seconds = parse_double(key, v);
  else if (key == "k") det.k = parse_uint(key, v);
  else if (key == "d") det.d = parse_uint(key, v);
  else if (key == "hidden") det.hidden = parse_uint(key, v);
  else if (key == "heads") det.heads = parse_uint(key, v);
  else if (key == "alpha") det.alpha = parse_double(key, v);
  else if (key == "beta") {
    const double g = det.gamma();
    det.beta = parse_double(key, v);
    det.set_gamma(g);
  } else if (key == "gamma") det.set_gamma(parse_double(key, v));
  else if (key == "lambda") det.lambda = parse_double(key, v);
  else if (key == "lr") det.lr = parse_double(key, v);
  else if (key == "epochs_initial") det.epochs_initial = parse_uint(key, v);
  else if (key == "epochs_incremental") det.epochs_incremental = parse_uint(key, v);
  else if (key == "history_window") det.history_window = parse_uint(key, v);
  else if (key == "positional_encoding") det.positional_encoding = parse_bool(key, v);
  else if (key == "variant") {
    if (v == "temporal") det.variant = detector::Variant::temporal;
    else if (v == "static") det.variant = detector::Variant::static_graph;
    else throw ConfigError("variant: expected temporal or static, got '" + v + "'");
  } else if (key == "policy") {
    if (v == "top1_on_no_consensus") cfg.pipeline.policy.mode = anomaly::PolicyMode::top1_on_no_consensus;
    else if (v == "top1_always") cfg.pipeline.policy.mode = anomaly::PolicyMode::top1_always;
    else if (v == "threshold") cfg.pipeline.policy.mode = anomaly::PolicyMode::threshold;
    else throw ConfigError("policy: unknown mode '" + v + "'");
  } else if (key == "tau") cfg.pipeline.policy.tau = parse_double(key, v);
  else if (key == "carry_parameters") cfg.pipeline.carry_parameters = parse_bool(key, v);
  else throw ConfigError("unknown setting '" + key + "'");
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find_first_of("=:");
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    try {
      apply_setting(base, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

std::map<std::string, std::string> to_settings(const ExperimentConfig& cfg) {
  const auto& det = cfg.pipeline.detector;
  std::map<std::string, std::string> s;
  s["n_agents"] = std::to_string(cfg.n_agents);
  s["max_rounds"] = std::to_string(cfg.max_rounds);
  s["min_rounds"] = std::to_string(cfg.min_rounds);
  s["topology"] = fmt(cfg.topology);
  s["attack"] = to_string(cfg.attack);
  s["persuasion"] = fmt(cfg.persuasion);
  s["p_correct"] = fmt(cfg.p_correct);
  s["p_follow"] = fmt(cfg.p_follow);
  s["role_prompt"] = cfg.role_prompt;
  s["defend"] = cfg.defend ? "true" : "false";
  s["checkpoint"] = cfg.checkpoint;
  s["corpus"] = cfg.corpus;
  s["tasks"] = std::to_string(cfg.tasks);
  s["choices"] = std::to_string(cfg.choices);
  s["trials"] = std::to_string(cfg.trials);
  s["seed"] = std::to_string(cfg.seed);
  s["decay"] = cfg.decay.kind == DecayKind::exponential ? "exponential" : "linear";
  s["decay_lambda"] = fmt(cfg.decay.lambda);
  s["pooling"] = cfg.pooling == Pooling::pooled ? "pooled" : "per_episode";
  s["record_runtime"] = cfg.record_runtime ? "true" : "false";
  s["remote_agent_url"] = cfg.remote_agent_url;
  s["remote_agent_token"] = cfg.remote_agent_token;
  s["embedder_url"] = cfg.embedder_url;
  s["remote_timeout_seconds"] = fmt(cfg.remote_timeout_seconds);
  s["k"] = std::to_string(det.k);
  s["d"] = std::to_string(det.d);
  s["hidden"] = std::to_string(det.hidden);
  s["heads"] = std::to_string(det.heads);
  s["alpha"] = fmt(det.alpha);
  s["beta"] = fmt(det.beta);
  s["lambda"] = fmt(det.lambda);
  s["lr"] = fmt(det.lr);
  s["epochs_initial"] = std::to_string(det.epochs_initial);
  s["epochs_incremental"] = std::to_string(det.epochs_incremental);
  s["history_window"] = std::to_string(det.history_window);
  s["positional_encoding"] = det.positional_encoding ? "true" : "false";
  s["variant"] = det.variant == detector::Variant::temporal ? "temporal" : "static";
  s["policy"] = policy_name(cfg.pipeline.policy.mode);
  s["tau"] = fmt(cfg.pipeline.policy.tau);
  s["carry_parameters"] = cfg.pipeline.carry_parameters ? "true" : "false";
  return s;
}

void apply_environment(ExperimentConfig& cfg) {
  if (const char* v = std::getenv("GUARDIAN_REMOTE_AGENT_URL"); v && *v) cfg.remote_agent_url = v;
  if (const char* v = std::getenv("GUARDIAN_REMOTE_AGENT_TOKEN"); v && *v) cfg.remote_agent_token = v;
  if (const char* v = std::getenv("GUARDIAN_EMBEDDER_URL"); v && *v) cfg.embedder_url = v;
}

std::string config_hash(const ExperimentConfig& cfg) {
  static const std::set<std::string> excluded = {"remote_agent_url", "remote_agent_token",
                                                 "embedder_url", "record_runtime"};
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [k, v] : to_settings(cfg)) {
    if (excluded.contains(k)) continue;
    for (unsigned char c : k + "=" + v + "\n") {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace guardian::harness
