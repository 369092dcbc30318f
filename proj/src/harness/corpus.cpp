#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "guardian/harness.hpp"
#include "guardian/rng.hpp"

namespace guardian::harness {

std::vector<Task> synthetic_corpus(std::size_t count, std::size_t choices, std::uint64_t seed) {
  if (choices < 2) throw std::invalid_argument("synthetic_corpus: need >= 2 choices");
  std::vector<Task> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = make_rng(seed, {0xc0de, i});
    std::uniform_int_distribution<int> operand(2, 99);
    const int a = operand(rng);
    const int b = operand(rng);
    const int sum = a + b;
    std::set<int> answers = {sum};
    std::uniform_int_distribution<int> offset(-12, 12);
    while (answers.size() < choices) {
      const int c = sum + offset(rng);
      if (c > 0) answers.insert(c);
    }
    std::vector<std::string> space;
    for (int x : answers) space.push_back(std::to_string(x));
    std::shuffle(space.begin(), space.end(), rng);
    Task t;
    char id[32];
    std::snprintf(id, sizeof id, "q%04zu", i);
    t.id = id;
    t.question = "What is " + std::to_string(a) + " plus " + std::to_string(b) + "?";
    t.answer_space = space;
    t.correct = static_cast<std::size_t>(
        std::find(space.begin(), space.end(), std::to_string(sum)) - space.begin());
    out.push_back(std::move(t));
  }
  return out;
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  if (!s.empty() && s.back() == sep) parts.emplace_back();
  return parts;
}

}  // namespace

std::vector<Task> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open corpus");
  std::vector<Task> tasks;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& why) {
    throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 4) fail("expected 4 tab-separated fields, found " + std::to_string(fields.size()));
    Task t;
    t.id = fields[0];
    t.question = fields[1];
    t.answer_space = split(fields[2], '|');
    if (t.id.empty()) fail("empty task id");
    if (!ids.insert(t.id).second) fail("duplicate task id '" + t.id + "'");
    const std::string& idx = fields[3];
    if (idx.empty() || idx.find_first_not_of("0123456789") != std::string::npos) {
      fail("correct index '" + idx + "' is not a non-negative integer");
    }
    t.correct = std::stoul(idx);
    try {
      t.validate();
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
    tasks.push_back(std::move(t));
  }
  if (tasks.empty()) throw std::runtime_error(path.string() + ": corpus has no tasks");
  return tasks;
}

void save_corpus(const std::filesystem::path& path, std::span<const Task> tasks) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot write corpus");
  for (const auto& t : tasks) {
    out << t.id << '\t' << t.question << '\t';
    for (std::size_t i = 0; i < t.answer_space.size(); ++i) out << (i ? "|" : "") << t.answer_space[i];
    out << '\t' << t.correct << '\n';
  }
}

}  // namespace guardian::harness
