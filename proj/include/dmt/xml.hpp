#pragma once

// Minimal XML reader/writer covering the annotation schema: elements,
// attributes, character data, comments, prolog and DOCTYPE. No namespaces,
// no CDATA, no external entities. Errors carry 1-based line numbers.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dmt/core.hpp"

namespace dmt {

struct XmlNode {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;
  std::vector<XmlNode> children;
  std::string text;  // concatenated character data
  int line = 0;

  const std::string* attribute(std::string_view key) const {
    for (const auto& [k, v] : attributes)
      if (k == key) return &v;
    return nullptr;
  }
};

namespace detail {

class XmlParser {
 public:
  explicit XmlParser(std::string_view input) : in_(input) {}

  XmlNode parse_document() {
    skip_misc();
    if (eof()) throw ParseError("no root element", line_);
    XmlNode root = parse_element();
    skip_misc();
    if (!eof()) throw ParseError("content after root element", line_);
    return root;
  }

 private:
  bool eof() const { return pos_ >= in_.size(); }
  char peek() const { return in_[pos_]; }
  bool starts_with(std::string_view s) const {
    return in_.compare(pos_, s.size(), s) == 0;
  }

  void advance(std::size_t n = 1) {
    for (std::size_t i = 0; i < n && pos_ < in_.size(); ++i)
      if (in_[pos_++] == '\n') ++line_;
  }

  void skip_whitespace() {
    while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\r' ||
                      peek() == '\n'))
      advance();
  }

  void skip_until(std::string_view terminator) {
    const int start = line_;
    while (!eof()) {
      if (starts_with(terminator)) {
        advance(terminator.size());
        return;
      }
      advance();
    }
    throw ParseError("unterminated '" + std::string(terminator) + "'", start);
  }

  // Whitespace, comments, processing instructions and DOCTYPE.
  void skip_misc() {
    for (;;) {
      skip_whitespace();
      if (starts_with("<!--")) {
        advance(4);
        skip_until("-->");
      } else if (starts_with("<?")) {
        advance(2);
        skip_until("?>");
      } else if (starts_with("<!")) {
        advance(2);
        skip_until(">");
      } else {
        return;
      }
    }
  }

  static bool is_name_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
           (c >= '0' && c <= '9') || c == '_' || c == '-' || c == '.' ||
           c == ':';
  }

  std::string parse_name() {
    const std::size_t start = pos_;
    while (!eof() && is_name_char(peek())) advance();
    if (pos_ == start) throw ParseError("expected a name", line_);
    return std::string(in_.substr(start, pos_ - start));
  }

  std::string decode_entities(std::string_view raw, int at_line) {
    std::string out;
    out.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] != '&') {
        out.push_back(raw[i]);
        continue;
      }
      const std::size_t end = raw.find(';', i);
      if (end == std::string_view::npos)
        throw ParseError("unterminated entity", at_line);
      const std::string_view name = raw.substr(i + 1, end - i - 1);
      if (name == "amp")
        out.push_back('&');
      else if (name == "lt")
        out.push_back('<');
      else if (name == "gt")
        out.push_back('>');
      else if (name == "quot")
        out.push_back('"');
      else if (name == "apos")
        out.push_back('\'');
      else if (!name.empty() && name[0] == '#') {
        int code = 0;
        for (std::size_t k = 1; k < name.size(); ++k) {
          if (name[k] < '0' || name[k] > '9')
            throw ParseError("bad character reference", at_line);
          code = code * 10 + (name[k] - '0');
        }
        if (code < 1 || code > 127)
          throw ParseError("unsupported character reference", at_line);
        out.push_back(char(code));
      } else {
        throw ParseError("unknown entity '&" + std::string(name) + ";'",
                         at_line);
      }
      i = end;
    }
    return out;
  }

  std::string parse_attribute_value() {
    if (eof() || (peek() != '"' && peek() != '\''))
      throw ParseError("expected a quoted attribute value", line_);
    const char quote = peek();
    const int at_line = line_;
    advance();
    const std::size_t start = pos_;
    while (!eof() && peek() != quote) {
      if (peek() == '<') throw ParseError("'<' in attribute value", at_line);
      advance();
    }
    if (eof()) throw ParseError("unterminated attribute value", at_line);
    const std::string_view raw = in_.substr(start, pos_ - start);
    advance();  // closing quote
    return decode_entities(raw, at_line);
  }

  XmlNode parse_element() {
    if (eof() || peek() != '<') throw ParseError("expected '<'", line_);
    XmlNode node;
    node.line = line_;
    advance();
    node.name = parse_name();
    for (;;) {
      skip_whitespace();
      if (eof()) throw ParseError("unterminated start tag", node.line);
      if (starts_with("/>")) {
        advance(2);
        return node;
      }
      if (peek() == '>') {
        advance();
        break;
      }
      std::string key = parse_name();
      skip_whitespace();
      if (eof() || peek() != '=')
        throw ParseError("expected '=' after attribute '" + key + "'", line_);
      advance();
      skip_whitespace();
      node.attributes.emplace_back(std::move(key), parse_attribute_value());
    }
    // Content: text, children, comments, until the matching end tag.
    for (;;) {
      const std::size_t start = pos_;
      const int text_line = line_;
      while (!eof() && peek() != '<') advance();
      if (pos_ > start)
        node.text +=
            decode_entities(in_.substr(start, pos_ - start), text_line);
      if (eof())
        throw ParseError("missing end tag for <" + node.name + ">", node.line);
      if (starts_with("<!--")) {
        advance(4);
        skip_until("-->");
        continue;
      }
      if (starts_with("</")) {
        advance(2);
        const std::string closing = parse_name();
        if (closing != node.name)
          throw ParseError("mismatched end tag </" + closing + "> for <" +
                               node.name + ">",
                           line_);
        skip_whitespace();
        if (eof() || peek() != '>') throw ParseError("malformed end tag", line_);
        advance();
        return node;
      }
      node.children.push_back(parse_element());
    }
  }

  std::string_view in_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

}  // namespace detail

inline XmlNode parse_xml(std::string_view input) {
  return detail::XmlParser(input).parse_document();
}

inline std::string xml_escape(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (char c : raw) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace dmt
