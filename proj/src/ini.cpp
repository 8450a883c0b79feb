#include "osco/ini.hpp"

#include <cctype>

namespace osco {

std::string trim(std::string_view s) {
  size_t b = 0;
  size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t pos = s.find(sep, start);
    std::string piece = trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (!piece.empty()) out.push_back(piece);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

const IniEntry* IniSection::find(std::string_view key) const {
  for (const auto& e : entries)
    if (e.key == key) return &e;
  return nullptr;
}

const IniSection* IniDocument::find(std::string_view name) const {
  for (const auto& s : sections)
    if (s.name == name) return &s;
  return nullptr;
}

IniDocument IniDocument::parse(std::string_view text) {
  IniDocument doc;
  int line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
    ++line_no;

    std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    const int indent = static_cast<int>(raw.find_first_not_of(" \t")) + 1;

    if (line.front() == '[') {
      if (line.back() != ']')
        throw ParseError("unterminated section header", line_no, indent);
      std::string name = trim(std::string_view(line).substr(1, line.size() - 2));
      if (name.empty()) throw ParseError("empty section name", line_no, indent + 1);
      if (doc.find(name) != nullptr)
        throw ParseError("duplicate section [" + name + "]", line_no, indent);
      doc.sections.push_back(IniSection{name, line_no, {}});
      continue;
    }

    const size_t eq = raw.find('=');
    if (eq == std::string_view::npos)
      throw ParseError("expected 'key = value'", line_no, indent);
    std::string key = trim(raw.substr(0, eq));
    if (key.empty()) throw ParseError("missing key before '='", line_no, static_cast<int>(eq) + 1);
    std::string value = trim(raw.substr(eq + 1));
    const size_t vstart = raw.find_first_not_of(" \t", eq + 1);
    const int vcol = static_cast<int>(vstart == std::string_view::npos ? raw.size() : vstart) + 1;

    if (doc.sections.empty()) doc.sections.push_back(IniSection{"", line_no, {}});
    IniSection& sec = doc.sections.back();
    if (sec.find(key) != nullptr)
      throw ParseError("duplicate key '" + key + "' in [" + sec.name + "]", line_no, indent);
    sec.entries.push_back(IniEntry{key, value, line_no, indent, vcol});
  }
  return doc;
}

}  // namespace osco
