#pragma once

// Text formats: the type file ("id,u,c,mass") and the mechanism table the
// command-line tool emits, which can be read back for feasibility checks.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "upkeep/model.hpp"

namespace upkeep {

class ParseError : public std::runtime_error {
public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

/// Parses a type file. Lines starting with '#' and blank lines are skipped;
/// the first data line must be the header "id,u,c,mass".
TypeDistribution parse_types(std::string_view text);

std::string read_file(const std::string& path);

/// 12 significant digits; infinities render as "inf" / "-inf".
std::string format_number(double v);
double parse_number(std::string_view field, std::size_t line);

struct MechanismTable {
  TypeDistribution types;
  Mechanism mechanism;
  std::vector<std::string> classes;
  double y = 0.0;
  double W = 0.0;
  double balance_residual = 0.0;
};

inline constexpr const char* kMechanismHeader = "id,u,c,mass,nu,R,P,utility,class";

std::string format_mechanism_table(const TypeDistribution& d, const Mechanism& m,
                                   const std::vector<std::string>& classes, double y, double rho);

/// Reads back a table written by format_mechanism_table.
MechanismTable parse_mechanism_table(std::string_view text);

std::vector<std::string> split_csv(std::string_view line);

}  // namespace upkeep
