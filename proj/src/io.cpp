#include "upkeep/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace upkeep {

std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    auto field = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
      field.remove_suffix(1);
    out.emplace_back(field);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) v = 0.0;  // drop negative zero
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

double parse_number(std::string_view field, std::size_t line) {
  const std::string s(field);
  if (s == "inf") return kInf;
  if (s == "-inf") return -kInf;
  if (s.empty()) throw ParseError(line, "empty numeric field");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE || std::isnan(v))
    throw ParseError(line, "not a number: '" + s + "'");
  return v;
}

namespace {

/// Non-comment lines with their 1-based line numbers.
std::vector<std::pair<std::size_t, std::string>> data_lines(std::string_view text) {
  std::vector<std::pair<std::size_t, std::string>> out;
  std::size_t lineno = 0, start = 0;
  while (start <= text.size()) {
    const auto pos = text.find('\n', start);
    std::string line(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first != std::string::npos && line[first] != '#') out.emplace_back(lineno, line);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

TypeDistribution parse_types(std::string_view text) {
  const auto lines = data_lines(text);
  if (lines.empty()) throw ParseError(1, "missing header 'id,u,c,mass'");
  const auto header = split_csv(lines[0].second);
  if (header != std::vector<std::string>{"id", "u", "c", "mass"})
    throw ParseError(lines[0].first, "expected header 'id,u,c,mass'");

  std::vector<AgentType> types;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const auto& [lineno, line] = lines[k];
    const auto f = split_csv(line);
    if (f.size() != 4) throw ParseError(lineno, "expected 4 fields, got " + std::to_string(f.size()));
    if (f[0].empty()) throw ParseError(lineno, "empty id");
    AgentType t{f[0], parse_number(f[1], lineno), parse_number(f[2], lineno), parse_number(f[3], lineno)};
    auto bad = [&](const char* field) {
      return ValidationError("line " + std::to_string(lineno) + ": invalid " + field + " for type '" +
                             t.id + "'");
    };
    if (!(t.u > 0.0) || !std::isfinite(t.u)) throw bad("u");
    if (!(t.c > 0.0) || !std::isfinite(t.c)) throw bad("c");
    if (!(t.mass >= 0.0) || !std::isfinite(t.mass)) throw bad("mass");
    types.push_back(std::move(t));
  }
  return TypeDistribution(std::move(types));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_mechanism_table(const TypeDistribution& d, const Mechanism& m,
                                   const std::vector<std::string>& classes, double y, double rho) {
  std::string out = std::string(kMechanismHeader) + "\n";
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& t = d[i];
    out += t.id + "," + format_number(t.u) + "," + format_number(t.c) + "," + format_number(t.mass) +
           "," + format_number(t.nu()) + "," + format_number(m.R[i]) + "," + format_number(m.P[i]) +
           "," + format_number(agent_utility(t, m.R[i], m.P[i])) + "," +
           (i < classes.size() ? classes[i] : std::string()) + "\n";
  }
  out += "\nQ=" + format_number(m.Q) + ", y=" + format_number(y) + ", W=" + format_number(welfare(m, d)) +
         ", balance_residual=" + format_number(balance_residual(m, d, rho)) + "\n";
  return out;
}

MechanismTable parse_mechanism_table(std::string_view text) {
  const auto lines = data_lines(text);
  if (lines.empty() || lines[0].second != kMechanismHeader)
    throw ParseError(lines.empty() ? 1 : lines[0].first, "expected mechanism table header");
  MechanismTable tab;
  std::vector<AgentType> types;
  bool have_summary = false;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const auto& [lineno, line] = lines[k];
    if (line.rfind("Q=", 0) == 0) {
      for (const auto& part : split_csv(line)) {
        const auto eq = part.find('=');
        if (eq == std::string::npos) throw ParseError(lineno, "malformed summary field '" + part + "'");
        const auto key = part.substr(0, eq);
        const double v = parse_number(std::string_view(part).substr(eq + 1), lineno);
        if (key == "Q")
          tab.mechanism.Q = v;
        else if (key == "y")
          tab.y = v;
        else if (key == "W")
          tab.W = v;
        else if (key == "balance_residual")
          tab.balance_residual = v;
        else
          throw ParseError(lineno, "unknown summary field '" + key + "'");
      }
      have_summary = true;
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() != 9) throw ParseError(lineno, "expected 9 fields");
    types.push_back({f[0], parse_number(f[1], lineno), parse_number(f[2], lineno), parse_number(f[3], lineno)});
    tab.mechanism.R.push_back(parse_number(f[5], lineno));
    tab.mechanism.P.push_back(parse_number(f[6], lineno));
    tab.classes.push_back(f[8]);
  }
  if (!have_summary) throw ParseError(lines.back().first, "missing summary line");
  tab.types = TypeDistribution(std::move(types));
  return tab;
}

}  // namespace upkeep
