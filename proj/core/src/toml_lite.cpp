#include "hetadmit/toml_lite.hpp"

#include <charconv>
#include <sstream>

#include "hetadmit/error.hpp"

namespace hetadmit::toml_lite {

namespace {

using nlohmann::json;

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
  throw Error(Errc::ParseError, "toml line " + std::to_string(line) + ": " + msg);
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool is_bare_key(std::string_view key) {
  if (key.empty()) return false;
  for (char c : key) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '_' || c == '-';
    if (!ok) return false;
  }
  return true;
}

// Drops a trailing comment that is not inside a string.
std::string_view strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_string && c == '\\') {
      ++i;
    } else if (c == '"') {
      in_string = !in_string;
    } else if (c == '#' && !in_string) {
      return line.substr(0, i);
    }
  }
  return line;
}

class ValueParser {
 public:
  ValueParser(std::string_view text, std::size_t line) : text_(text), line_(line) {}

  json parse_all() {
    json v = parse_value();
    skip_ws();
    if (pos_ != text_.size()) fail(line_, "trailing characters after value");
    return v;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
  }

  json parse_value() {
    skip_ws();
    if (pos_ >= text_.size()) fail(line_, "missing value");
    const char c = text_[pos_];
    if (c == '"') return parse_string();
    if (c == '[') return parse_array();
    if (text_.substr(pos_, 4) == "true") {
      pos_ += 4;
      return true;
    }
    if (text_.substr(pos_, 5) == "false") {
      pos_ += 5;
      return false;
    }
    return parse_number();
  }

  json parse_string() {
    ++pos_;
    std::string out;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      char c = text_[pos_++];
      if (c == '\\') {
        if (pos_ >= text_.size()) fail(line_, "dangling escape");
        const char e = text_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(line_, std::string("unsupported escape \\") + e);
        }
      }
      out.push_back(c);
    }
    if (pos_ >= text_.size()) fail(line_, "unterminated string");
    ++pos_;
    return out;
  }

  json parse_array() {
    ++pos_;
    json arr = json::array();
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == ']') {
      ++pos_;
      return arr;
    }
    while (true) {
      arr.push_back(parse_value());
      skip_ws();
      if (pos_ >= text_.size()) fail(line_, "unterminated array");
      if (text_[pos_] == ',') {
        ++pos_;
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ']') {
          ++pos_;
          return arr;
        }
        continue;
      }
      if (text_[pos_] == ']') {
        ++pos_;
        return arr;
      }
      fail(line_, "expected ',' or ']' in array");
    }
  }

  json parse_number() {
    const auto start = pos_;
    while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != ']' &&
           text_[pos_] != ' ' && text_[pos_] != '\t') {
      ++pos_;
    }
    std::string token;
    for (char c : text_.substr(start, pos_ - start)) {
      if (c != '_') token.push_back(c);
    }
    if (token.empty()) fail(line_, "expected a value");
    const char* b = token.data();
    const char* e = token.data() + token.size();
    const bool floating = token.find_first_of(".eE") != std::string::npos ||
                          token == "inf" || token == "nan";
    if (!floating) {
      if (token[0] == '-') {
        std::int64_t v = 0;
        auto [p, ec] = std::from_chars(b, e, v);
        if (ec == std::errc() && p == e) return v;
      } else {
        std::uint64_t v = 0;
        auto [p, ec] = std::from_chars(token[0] == '+' ? b + 1 : b, e, v);
        if (ec == std::errc() && p == e) return v;
      }
      fail(line_, "invalid integer '" + token + "'");
    }
    double v = 0;
    auto [p, ec] = std::from_chars(token[0] == '+' ? b + 1 : b, e, v);
    if (ec != std::errc() || p != e) fail(line_, "invalid number '" + token + "'");
    return v;
  }

  std::string_view text_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

std::string format_scalar(const json& v) {
  switch (v.type()) {
    case json::value_t::string: {
      std::string out = "\"";
      for (char c : v.get_ref<const std::string&>()) {
        switch (c) {
          case '"': out += "\\\""; break;
          case '\\': out += "\\\\"; break;
          case '\n': out += "\\n"; break;
          case '\t': out += "\\t"; break;
          default: out.push_back(c);
        }
      }
      return out + "\"";
    }
    case json::value_t::boolean: return v.get<bool>() ? "true" : "false";
    case json::value_t::number_integer: return std::to_string(v.get<std::int64_t>());
    case json::value_t::number_unsigned: return std::to_string(v.get<std::uint64_t>());
    case json::value_t::number_float: {
      char buf[64];
      auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v.get<double>());
      std::string s(buf, p);
      if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
      return s;
    }
    case json::value_t::array: {
      std::string out = "[";
      bool first = true;
      for (const auto& item : v) {
        if (!first) out += ", ";
        first = false;
        out += format_scalar(item);
      }
      return out + "]";
    }
    default:
      throw Error(Errc::InvalidArgument, "value cannot be written as a toml scalar");
  }
}

bool is_table_array(const json& v) {
  if (!v.is_array() || v.empty()) return false;
  for (const auto& item : v) {
    if (!item.is_object()) return false;
  }
  return true;
}

void dump_keys(std::ostringstream& out, const json& table) {
  for (const auto& [key, value] : table.items()) {
    if (value.is_object() || is_table_array(value) || value.is_null()) continue;
    out << key << " = " << format_scalar(value) << '\n';
  }
}

}  // namespace

json parse(std::string_view text) {
  json root = json::object();
  json* current = &root;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    const auto line = trim(strip_comment(raw));
    if (line.empty()) continue;

    if (line.starts_with("[[")) {
      if (!line.ends_with("]]")) fail(line_no, "malformed array-of-tables header");
      const auto name = trim(line.substr(2, line.size() - 4));
      if (!is_bare_key(name)) fail(line_no, "invalid table name");
      json& arr = root[std::string(name)];
      if (arr.is_null()) arr = json::array();
      if (!arr.is_array()) fail(line_no, "'" + std::string(name) + "' is not an array");
      arr.push_back(json::object());
      current = &arr.back();
      continue;
    }
    if (line.starts_with('[')) {
      if (!line.ends_with(']')) fail(line_no, "malformed table header");
      const auto name = trim(line.substr(1, line.size() - 2));
      if (!is_bare_key(name)) fail(line_no, "invalid table name");
      json& table = root[std::string(name)];
      if (!table.is_null()) fail(line_no, "table '" + std::string(name) + "' defined twice");
      table = json::object();
      current = &table;
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(line_no, "expected 'key = value'");
    const auto key = std::string(trim(line.substr(0, eq)));
    if (!is_bare_key(key)) fail(line_no, "invalid key '" + key + "'");
    if (current->contains(key)) fail(line_no, "duplicate key '" + key + "'");
    (*current)[key] = ValueParser(trim(line.substr(eq + 1)), line_no).parse_all();
  }
  return root;
}

std::string dump(const json& tree) {
  if (!tree.is_object()) throw Error(Errc::InvalidArgument, "toml root must be a table");
  std::ostringstream out;
  dump_keys(out, tree);
  for (const auto& [key, value] : tree.items()) {
    if (value.is_object()) {
      out << "\n[" << key << "]\n";
      dump_keys(out, value);
    } else if (is_table_array(value)) {
      for (const auto& item : value) {
        out << "\n[[" << key << "]]\n";
        dump_keys(out, item);
      }
    }
  }
  return out.str();
}

}  // namespace hetadmit::toml_lite
