#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include "guardian/harness.hpp"

namespace guardian::harness {

using nlohmann::json;

json episode_to_json(const EpisodeLog& log) {
  json task = {{"id", log.task.id},
               {"question", log.task.question},
               {"answer_space", log.task.answer_space},
               {"correct", log.task.correct_answer()}};
  json rounds = json::array();
  for (const auto& r : log.rounds) {
    json agents = json::array();
    for (AgentId a : r.agents) agents.push_back(a.value);
    json edges = json::array();
    for (const auto& [from, to] : r.edges) edges.push_back({from.value, to.value});
    rounds.push_back({{"t", r.t},
                      {"agents", agents},
                      {"responses", r.responses},
                      {"answers", r.answers},
                      {"edges", edges},
                      {"removed", r.removed ? json(r.removed->value) : json(nullptr)},
                      {"scores", r.scores ? json(*r.scores) : json(nullptr)}});
  }
  json h = json::array();
  json err = json::array();
  if (log.ground_truth.available) {
    for (const auto& labels : log.ground_truth.rounds) {
      h.push_back(labels.h);
      err.push_back(labels.err);
    }
  }
  json corrupted = json::array();
  for (const auto& e : log.ground_truth.corrupted_edges) {
    corrupted.push_back({e.from_round, e.from.value, e.to_round, e.to.value});
  }
  return {{"task", task},
          {"rounds", rounds},
          {"ground_truth", {{"h", h}, {"err", err}, {"corrupted_edges", corrupted}}},
          {"final_answer", log.final_answer},
          {"api_calls", log.api_calls}};
}

std::vector<std::string> validate_episode_json(const json& j) {
  std::vector<std::string> errors;
  auto need = [&](const json& obj, const char* key, auto pred, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) {
      errors.push_back(where + ": missing '" + key + "'");
      return false;
    }
    if (!pred(obj.at(key))) {
      errors.push_back(where + ": '" + key + "' has the wrong type");
      return false;
    }
    return true;
  };
  auto only = [&](const json& obj, std::set<std::string> keys, const std::string& where) {
    if (!obj.is_object()) return;
    for (const auto& [k, v] : obj.items())
      if (!keys.contains(k)) errors.push_back(where + ": unexpected key '" + k + "'");
  };
  auto is_arr = [](const json& v) { return v.is_array(); };
  auto is_str = [](const json& v) { return v.is_string(); };
  auto is_uint = [](const json& v) { return v.is_number_integer() && v.get<std::int64_t>() >= 0; };
  auto all_of = [](const json& arr, auto pred) {
    for (const auto& x : arr)
      if (!pred(x)) return false;
    return true;
  };

  if (!j.is_object()) return {"episode: not an object"};
  only(j, {"task", "rounds", "ground_truth", "final_answer", "api_calls"}, "episode");
  if (need(j, "task", [](const json& v) { return v.is_object(); }, "episode")) {
    const json& t = j["task"];
    need(t, "id", is_str, "task");
    need(t, "question", is_str, "task");
    const bool space_ok = need(t, "answer_space", [&](const json& v) { return v.is_array() && all_of(v, is_str); }, "task");
    if (need(t, "correct", is_str, "task") && space_ok) {
      const auto& space = t["answer_space"];
      if (std::find(space.begin(), space.end(), t["correct"]) == space.end()) {
        errors.push_back("task: correct answer not in answer_space");
      }
    }
  }
  std::size_t n_rounds = 0;
  std::vector<std::size_t> widths;
  if (need(j, "rounds", is_arr, "episode")) {
    n_rounds = j["rounds"].size();
    for (std::size_t i = 0; i < n_rounds; ++i) {
      const json& r = j["rounds"][i];
      const std::string where = "rounds[" + std::to_string(i) + "]";
      if (!r.is_object()) {
        errors.push_back(where + ": not an object");
        widths.push_back(0);
        continue;
      }
      only(r, {"t", "agents", "responses", "answers", "edges", "removed", "scores"}, where);
      need(r, "t", [](const json& v) { return v.is_number_integer(); }, where);
      std::size_t n = 0;
      if (need(r, "agents", [&](const json& v) { return v.is_array() && all_of(v, is_uint); }, where)) {
        n = r["agents"].size();
      }
      widths.push_back(n);
      for (const char* key : {"responses", "answers"}) {
        if (need(r, key, [&](const json& v) { return v.is_array() && all_of(v, is_str); }, where) &&
            r[key].size() != n) {
          errors.push_back(where + ": '" + key + "' length differs from agents");
        }
      }
      need(r, "edges", [&](const json& v) {
        return v.is_array() && all_of(v, [&](const json& e) { return e.is_array() && e.size() == 2 && all_of(e, is_uint); });
      }, where);
      need(r, "removed", [](const json& v) { return v.is_null() || v.is_number_unsigned(); }, where);
      if (need(r, "scores", [&](const json& v) {
            return v.is_null() || (v.is_array() && all_of(v, [](const json& x) { return x.is_number(); }));
          }, where) &&
          r["scores"].is_array() && r["scores"].size() != n) {
        errors.push_back(where + ": 'scores' length differs from agents");
      }
    }
  }
  if (need(j, "ground_truth", [](const json& v) { return v.is_object(); }, "episode")) {
    const json& g = j["ground_truth"];
    only(g, {"h", "err", "corrupted_edges"}, "ground_truth");
    for (const char* key : {"h", "err"}) {
      auto is_label_rows = [&](const json& v) {
        return v.is_array() && all_of(v, [&](const json& row) {
          return row.is_array() && all_of(row, [](const json& b) { return b.is_boolean(); });
        });
      };
      if (!need(g, key, is_label_rows, "ground_truth")) continue;
      const json& rows = g[key];
      if (rows.empty()) continue;  // labels unavailable
      if (rows.size() != n_rounds) {
        errors.push_back(std::string("ground_truth: '") + key + "' must have one row per round");
        continue;
      }
      for (std::size_t i = 0; i < rows.size() && i < widths.size(); ++i)
        if (rows[i].size() != widths[i]) {
          errors.push_back(std::string("ground_truth: '") + key + "' row " + std::to_string(i) +
                           " length differs from agents");
        }
    }
    need(g, "corrupted_edges", [&](const json& v) {
      return v.is_array() && all_of(v, [&](const json& e) { return e.is_array() && e.size() == 4 && all_of(e, is_uint); });
    }, "ground_truth");
  }
  need(j, "final_answer", is_str, "episode");
  need(j, "api_calls", is_uint, "episode");
  return errors;
}

EpisodeLog episode_from_json(const json& j) {
  if (const auto errors = validate_episode_json(j); !errors.empty()) {
    throw std::runtime_error("invalid episode record: " + errors.front());
  }
  EpisodeLog log;
  const json& t = j["task"];
  log.task.id = t["id"];
  log.task.question = t["question"];
  log.task.answer_space = t["answer_space"].get<std::vector<std::string>>();
  const auto& space = log.task.answer_space;
  log.task.correct = static_cast<std::size_t>(
      std::find(space.begin(), space.end(), t["correct"].get<std::string>()) - space.begin());

  const json& gt = j["ground_truth"];
  log.ground_truth.available = !gt["h"].empty() || j["rounds"].empty();
  for (std::size_t i = 0; i < j["rounds"].size(); ++i) {
    const json& r = j["rounds"][i];
    sim::RoundRecord rec;
    rec.t = r["t"];
    for (const auto& a : r["agents"]) rec.agents.push_back(AgentId{a.get<std::uint32_t>()});
    rec.responses = r["responses"].get<std::vector<std::string>>();
    rec.answers = r["answers"].get<std::vector<std::string>>();
    for (const auto& e : r["edges"]) {
      rec.edges.emplace_back(AgentId{e[0].get<std::uint32_t>()}, AgentId{e[1].get<std::uint32_t>()});
    }
    if (!r["removed"].is_null()) rec.removed = AgentId{r["removed"].get<std::uint32_t>()};
    if (!r["scores"].is_null()) rec.scores = r["scores"].get<std::vector<double>>();

    sim::RoundLabels labels;
    labels.round = rec.t;
    labels.agents = rec.agents;
    if (log.ground_truth.available && !gt["h"].empty()) {
      labels.h = gt["h"][i].get<std::vector<bool>>();
      labels.err = gt["err"][i].get<std::vector<bool>>();
    } else {
      labels.h.assign(rec.agents.size(), false);
      labels.err.assign(rec.agents.size(), false);
    }
    log.ground_truth.rounds.push_back(std::move(labels));
    log.rounds.push_back(std::move(rec));
  }
  for (const auto& e : gt["corrupted_edges"]) {
    log.ground_truth.corrupted_edges.push_back(graph::LayeredEdge{
        e[0].get<int>(), AgentId{e[1].get<std::uint32_t>()}, e[2].get<int>(), AgentId{e[3].get<std::uint32_t>()}});
  }
  log.final_answer = j["final_answer"];
  log.api_calls = j["api_calls"];
  return log;
}

void write_episodes(const std::filesystem::path& path, std::span<const EpisodeLog> logs) {
  json arr = json::array();
  for (const auto& log : logs) arr.push_back(episode_to_json(log));
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot write episodes");
  out << arr.dump(1) << '\n';
}

std::vector<EpisodeLog> read_episodes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open episodes");
  json arr;
  try {
    in >> arr;
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  if (!arr.is_array()) throw std::runtime_error(path.string() + ": expected a JSON array of episodes");
  std::vector<EpisodeLog> logs;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    try {
      logs.push_back(episode_from_json(arr[i]));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ": episode " + std::to_string(i) + ": " + e.what());
    }
  }
  return logs;
}

std::string metrics_csv(const std::string& config_hash, std::size_t trials, const MetricsReport& m) {
  auto num = [](std::optional<double> x) {
    if (!x) return std::string("NA");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *x);
    return std::string(buf);
  };
  return std::string(kMetricsHeader) + "\n" + config_hash + "," + std::to_string(trials) + "," +
         num(m.accuracy) + "," + num(m.detection_rate) + "," + num(m.fdr) + "," +
         num(m.api_calls_mean) + "," + num(m.runtime_seconds) + "\n";
}

}  // namespace guardian::harness
