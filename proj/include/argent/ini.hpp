#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "argent/errors.hpp"

namespace argent {

/// Flat structured text: `[section]` headers followed by `key = value` lines.
/// Order of sections and keys is preserved so written files are byte-stable.
class IniDocument {
 public:
  struct Entry {
    std::string key;
    std::string value;
    int line = 0;
  };
  struct Section {
    std::string name;
    std::vector<Entry> entries;
    int line = 0;
  };

  static IniDocument parse(const std::string& text, const std::string& source = "<input>") {
    IniDocument doc;
    doc.source_ = source;
    std::istringstream is(text);
    std::string raw;
    int line_no = 0;
    Section* current = nullptr;
    while (std::getline(is, raw)) {
      ++line_no;
      const std::string line = trim(strip_comment(raw));
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw FormatError(where(source, line_no) + "unterminated section header");
        const std::string name = trim(line.substr(1, line.size() - 2));
        if (name.empty()) throw FormatError(where(source, line_no) + "empty section name");
        if (doc.find_section(name)) throw FormatError(where(source, line_no) + "duplicate section [" + name + "]");
        doc.sections_.push_back({name, {}, line_no});
        current = &doc.sections_.back();
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw FormatError(where(source, line_no) + "expected 'key = value'");
      if (!current) {
        doc.sections_.push_back({"", {}, line_no});
        current = &doc.sections_.back();
      }
      const std::string key = trim(line.substr(0, eq));
      if (key.empty()) throw FormatError(where(source, line_no) + "empty key");
      for (const auto& e : current->entries)
        if (e.key == key) throw FormatError(where(source, line_no) + "duplicate key '" + key + "'");
      current->entries.push_back({key, trim(line.substr(eq + 1)), line_no});
    }
    return doc;
  }

  static IniDocument load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path);
    out << str();
  }

  std::string str() const {
    std::ostringstream os;
    bool first = true;
    for (const auto& s : sections_) {
      if (!first) os << '\n';
      first = false;
      if (!s.name.empty()) os << '[' << s.name << "]\n";
      for (const auto& e : s.entries) os << e.key << " = " << e.value << '\n';
    }
    return os.str();
  }

  Section& section(const std::string& name) {
    if (auto* s = find_section(name)) return *s;
    sections_.push_back({name, {}, 0});
    return sections_.back();
  }

  const Section* find_section(const std::string& name) const {
    for (const auto& s : sections_)
      if (s.name == name) return &s;
    return nullptr;
  }
  Section* find_section(const std::string& name) {
    for (auto& s : sections_)
      if (s.name == name) return &s;
    return nullptr;
  }

  const std::vector<Section>& sections() const { return sections_; }

  void set(const std::string& sec, const std::string& key, std::string value) {
    auto& s = section(sec);
    for (auto& e : s.entries)
      if (e.key == key) {
        e.value = std::move(value);
        return;
      }
    s.entries.push_back({key, std::move(value), 0});
  }

  const Entry* find(const std::string& sec, const std::string& key) const {
    const auto* s = find_section(sec);
    if (!s) return nullptr;
    for (const auto& e : s->entries)
      if (e.key == key) return &e;
    return nullptr;
  }

  const std::string& get(const std::string& sec, const std::string& key) const {
    const auto* e = find(sec, key);
    if (!e) throw FormatError(source_ + ": missing key '" + key + "' in section [" + sec + "]");
    return e->value;
  }

  std::string get_or(const std::string& sec, const std::string& key, const std::string& fallback) const {
    const auto* e = find(sec, key);
    return e ? e->value : fallback;
  }

  /// Location prefix "file:line: " for error messages about a given entry.
  std::string position(const std::string& sec, const std::string& key) const {
    const auto* e = find(sec, key);
    return where(source_, e ? e->line : 0);
  }

  const std::string& source() const { return source_; }

  static std::string where(const std::string& source, int line) {
    return source + ":" + std::to_string(line) + ": ";
  }

 private:
  static std::string strip_comment(const std::string& s) {
    const auto p = s.find_first_of("#;");
    return p == std::string::npos ? s : s.substr(0, p);
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::string source_ = "<input>";
  std::vector<Section> sections_;
};

/// Shortest text that parses back to the identical double.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace argent
