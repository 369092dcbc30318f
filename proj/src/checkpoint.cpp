#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "guardian/detector.hpp"

namespace guardian::detector {

namespace {

std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_double(const std::string& token) {
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0') {
    throw std::runtime_error("checkpoint: bad number '" + token + "'");
  }
  return v;
}

void write_tensor(std::ostream& os, const Tensor2D& t) {
  for (std::size_t i = 0; i < t.size(); ++i) os << (i ? " " : "") << hexfloat(t.values()[i]);
  os << '\n';
}

Tensor2D read_tensor(std::istream& is, std::size_t rows, std::size_t cols) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("checkpoint: truncated tensor");
  std::istringstream ls(line);
  std::vector<double> values;
  std::string tok;
  while (ls >> tok) values.push_back(parse_double(tok));
  if (values.size() != rows * cols) throw std::runtime_error("checkpoint: tensor size mismatch");
  return Tensor2D(rows, cols, std::move(values));
}

}  // namespace

void save_checkpoint(std::ostream& os, const GuardianDetector& det) {
  const auto& c = det.config();
  os << kCheckpointMagic << '\n';
  os << "config k " << c.k << '\n'
     << "config d " << c.d << '\n'
     << "config hidden " << c.hidden << '\n'
     << "config heads " << c.heads << '\n'
     << "config alpha " << hexfloat(c.alpha) << '\n'
     << "config beta " << hexfloat(c.beta) << '\n'
     << "config lambda " << hexfloat(c.lambda) << '\n'
     << "config lr " << hexfloat(c.lr) << '\n'
     << "config epochs_initial " << c.epochs_initial << '\n'
     << "config epochs_incremental " << c.epochs_incremental << '\n'
     << "config seed " << c.seed << '\n'
     << "config variant " << (c.variant == Variant::temporal ? "temporal" : "static") << '\n'
     << "config history_window " << c.history_window << '\n'
     << "config positional_encoding " << (c.positional_encoding ? 1 : 0) << '\n';
  for (const auto& e : det.params().entries()) {
    os << "param " << e.name << ' ' << e.value.rows() << ' ' << e.value.cols() << ' ' << e.step
       << '\n';
    write_tensor(os, e.value);
    write_tensor(os, e.first_moment);
    write_tensor(os, e.second_moment);
  }
  os << "end\n";
}

GuardianDetector load_checkpoint(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kCheckpointMagic) {
    throw std::runtime_error("checkpoint: missing " + std::string(kCheckpointMagic) + " header");
  }
  DetectorConfig c;
  ParamStore params;
  bool ended = false;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "end") {
      ended = true;
      break;
    }
    if (kind == "config") {
      std::string key, value;
      ls >> key >> value;
      if (key == "k") c.k = std::stoul(value);
      else if (key == "d") c.d = std::stoul(value);
      else if (key == "hidden") c.hidden = std::stoul(value);
      else if (key == "heads") c.heads = std::stoul(value);
      else if (key == "alpha") c.alpha = parse_double(value);
      else if (key == "beta") c.beta = parse_double(value);
      else if (key == "lambda") c.lambda = parse_double(value);
      else if (key == "lr") c.lr = parse_double(value);
      else if (key == "epochs_initial") c.epochs_initial = std::stoul(value);
      else if (key == "epochs_incremental") c.epochs_incremental = std::stoul(value);
      else if (key == "seed") c.seed = std::stoull(value);
      else if (key == "variant") c.variant = value == "static" ? Variant::static_graph : Variant::temporal;
      else if (key == "history_window") c.history_window = std::stoul(value);
      else if (key == "positional_encoding") c.positional_encoding = value != "0";
      else throw std::runtime_error("checkpoint: unknown config key " + key);
    } else if (kind == "param") {
      std::string name;
      std::size_t rows = 0, cols = 0;
      std::uint64_t step = 0;
      if (!(ls >> name >> rows >> cols >> step)) throw std::runtime_error("checkpoint: bad param line");
      auto& e = params.add(name, read_tensor(is, rows, cols));
      e.first_moment = read_tensor(is, rows, cols);
      e.second_moment = read_tensor(is, rows, cols);
      e.step = step;
    } else if (!kind.empty()) {
      throw std::runtime_error("checkpoint: unexpected record '" + kind + "'");
    }
  }
  if (!ended) throw std::runtime_error("checkpoint: truncated (no end marker)");
  return GuardianDetector(c, std::move(params));
}

void save_checkpoint(const std::string& path, const GuardianDetector& det) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("checkpoint: cannot write " + path);
  save_checkpoint(os, det);
}

GuardianDetector load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("checkpoint: cannot read " + path);
  return load_checkpoint(is);
}

}  // namespace guardian::detector
