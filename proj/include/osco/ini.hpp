#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace osco {

/// Error raised while reading a key-value document; carries the source position.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line, int column)
      : std::runtime_error(format(what, line, column)), line_(line), column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  static std::string format(const std::string& what, int line, int column) {
    return "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what;
  }
  int line_;
  int column_;
};

struct IniEntry {
  std::string key;
  std::string value;
  int line = 0;
  int key_column = 0;
  int value_column = 0;
};

struct IniSection {
  std::string name;
  int line = 0;
  std::vector<IniEntry> entries;

  const IniEntry* find(std::string_view key) const;
};

/// Ordered sections of `key = value` lines. `#` and `;` start comments at line
/// start; keys are unique within a section. Keys before any section header land
/// in a section with an empty name.
struct IniDocument {
  std::vector<IniSection> sections;

  static IniDocument parse(std::string_view text);
  const IniSection* find(std::string_view name) const;
};

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

}  // namespace osco
