#pragma once

// Minimal strict XML reader for the MDL dialect: elements, attributes,
// comments and an optional declaration. Character data other than whitespace,
// CDATA, DOCTYPE and processing instructions are rejected.

#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace riverhelm::xml {

struct Attribute {
  std::string name;
  std::string value;
  int line = 0;
  int col = 0;
};

struct Element {
  std::string name;
  std::vector<Attribute> attributes;  // document order
  std::vector<Element> children;
  int line = 0;
  int col = 0;

  const Attribute* attribute(std::string_view attr_name) const {
    for (const auto& a : attributes) {
      if (a.name == attr_name) return &a;
    }
    return nullptr;
  }
};

/// Throws mdl::ParseError on malformed input.
Element parse_document(std::string_view text);

/// Escapes a value for use inside a double-quoted attribute.
std::string escape_attribute(std::string_view value);

}  // namespace riverhelm::xml
