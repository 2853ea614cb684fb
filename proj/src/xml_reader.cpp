#include "xml_reader.hpp"

#include <cstdint>

#include "riverhelm/mdl.hpp"

namespace riverhelm::xml {
namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

bool is_name_start(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_' || c == ':' ||
         static_cast<unsigned char>(c) >= 0x80;
}

bool is_name_char(char c) { return is_name_start(c) || (c >= '0' && c <= '9') || c == '-' || c == '.'; }

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  Element document() {
    if (text_.size() >= 3 && text_.substr(0, 3) == "\xEF\xBB\xBF") advance(3);
    if (starts_with("<?xml")) declaration();
    misc();
    if (at_end()) fail("document has no root element");
    if (peek() != '<') fail("unexpected character data before root element");
    Element root = element();
    misc();
    if (!at_end()) fail("content after the root element");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& message) const { fail_at(line_, col_, message); }
  [[noreturn]] static void fail_at(int line, int col, const std::string& message) {
    throw mdl::ParseError(line, col, message);
  }

  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return text_[pos_]; }
  bool starts_with(std::string_view s) const { return text_.substr(pos_, s.size()) == s; }

  void advance(std::size_t n = 1) {
    for (std::size_t i = 0; i < n && pos_ < text_.size(); ++i) {
      if (text_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
      ++pos_;
    }
  }

  void skip_space() {
    while (!at_end() && is_space(peek())) advance();
  }

  void declaration() {
    const int line = line_, col = col_;
    const auto end = text_.find("?>", pos_);
    if (end == std::string_view::npos) fail_at(line, col, "unterminated XML declaration");
    advance(end + 2 - pos_);
  }

  void comment() {
    const int line = line_, col = col_;
    advance(4);
    const auto end = text_.find("--", pos_);
    if (end == std::string_view::npos) fail_at(line, col, "unterminated comment");
    advance(end - pos_);
    if (!starts_with("-->")) fail("'--' is not allowed inside a comment");
    advance(3);
  }

  // Whitespace and comments between elements.
  void misc() {
    for (;;) {
      skip_space();
      if (starts_with("<!--")) {
        comment();
      } else if (starts_with("<?")) {
        fail("processing instructions are not supported");
      } else if (starts_with("<!")) {
        fail("DOCTYPE and CDATA sections are not supported");
      } else {
        return;
      }
    }
  }

  std::string name() {
    if (at_end() || !is_name_start(peek())) fail("expected a name");
    const auto start = pos_;
    while (!at_end() && is_name_char(peek())) advance();
    return std::string(text_.substr(start, pos_ - start));
  }

  void entity(std::string& out) {
    const int line = line_, col = col_;
    const auto end = text_.find(';', pos_);
    if (end == std::string_view::npos || end - pos_ > 12) fail_at(line, col, "unterminated entity reference");
    const auto ref = text_.substr(pos_ + 1, end - pos_ - 1);
    if (ref == "amp") {
      out += '&';
    } else if (ref == "lt") {
      out += '<';
    } else if (ref == "gt") {
      out += '>';
    } else if (ref == "quot") {
      out += '"';
    } else if (ref == "apos") {
      out += '\'';
    } else if (ref.size() > 1 && ref[0] == '#') {
      const bool hex = ref[1] == 'x';
      const auto digits = ref.substr(hex ? 2 : 1);
      if (digits.empty()) fail_at(line, col, "empty character reference");
      std::uint32_t cp = 0;
      for (char c : digits) {
        int v;
        if (c >= '0' && c <= '9') {
          v = c - '0';
        } else if (hex && c >= 'a' && c <= 'f') {
          v = c - 'a' + 10;
        } else if (hex && c >= 'A' && c <= 'F') {
          v = c - 'A' + 10;
        } else {
          fail_at(line, col, "bad character reference");
        }
        cp = cp * (hex ? 16 : 10) + static_cast<std::uint32_t>(v);
        if (cp > 0x10FFFF) fail_at(line, col, "character reference out of range");
      }
      if (cp == 0 || (cp >= 0xD800 && cp <= 0xDFFF)) fail_at(line, col, "illegal character reference");
      append_utf8(out, cp);
    } else {
      fail_at(line, col, "unknown entity '&" + std::string(ref) + ";'");
    }
    advance(end + 1 - pos_);
  }

  std::string attribute_value() {
    if (at_end() || (peek() != '"' && peek() != '\'')) fail("expected a quoted attribute value");
    const char quote = peek();
    const int line = line_, col = col_;
    advance();
    std::string value;
    for (;;) {
      if (at_end()) fail_at(line, col, "unterminated attribute value");
      const char c = peek();
      if (c == quote) break;
      if (c == '<') fail("'<' is not allowed in attribute values");
      if (c == '&') {
        entity(value);
        continue;
      }
      value += c;
      advance();
    }
    advance();
    return value;
  }

  Element element() {
    Element el;
    el.line = line_;
    el.col = col_;
    advance();  // '<'
    el.name = name();
    const auto unterminated = [&] {
      fail_at(el.line, el.col, "unterminated <" + el.name + "> tag");
    };
    for (;;) {
      const bool had_space = !at_end() && is_space(peek());
      skip_space();
      if (at_end()) unterminated();
      if (starts_with("/>")) {
        advance(2);
        return el;
      }
      if (peek() == '>') {
        advance();
        break;
      }
      if (peek() == '<') unterminated();
      if (!had_space) fail("expected whitespace before attribute");
      Attribute attr;
      attr.line = line_;
      attr.col = col_;
      attr.name = name();
      skip_space();
      if (at_end() || peek() != '=') fail("expected '=' after attribute name");
      advance();
      skip_space();
      attr.value = attribute_value();
      if (el.attribute(attr.name) != nullptr) {
        fail_at(attr.line, attr.col, "duplicate attribute '" + attr.name + "'");
      }
      el.attributes.push_back(std::move(attr));
    }
    // Content: child elements, comments and whitespace only.
    for (;;) {
      skip_space();
      if (at_end()) fail_at(el.line, el.col, "element <" + el.name + "> is never closed");
      if (starts_with("</")) {
        const int line = line_, col = col_;
        advance(2);
        const auto closing = name();
        skip_space();
        if (at_end() || peek() != '>') fail("expected '>' in closing tag");
        advance();
        if (closing != el.name) {
          fail_at(line, col, "closing tag </" + closing + "> does not match <" + el.name + "> opened at line " +
                                 std::to_string(el.line));
        }
        return el;
      }
      if (starts_with("<!--")) {
        comment();
      } else if (starts_with("<!") || starts_with("<?")) {
        fail("unsupported markup inside element");
      } else if (peek() == '<') {
        el.children.push_back(element());
      } else {
        fail("character data is not allowed inside <" + el.name + ">");
      }
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

}  // namespace

Element parse_document(std::string_view text) { return Reader(text).document(); }

std::string escape_attribute(std::string_view value) {
  std::string out;
  out.reserve(value.size());
  for (char c : value) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\n': out += "&#10;"; break;
      case '\r': out += "&#13;"; break;
      case '\t': out += "&#9;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace riverhelm::xml
