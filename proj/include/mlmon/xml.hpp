#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mlmon::xml {

/// DOM node for the small XML documents this project exchanges (MPDs).
/// Namespaces are not resolved; `local_name()` strips any prefix.
struct Element {
    std::string name;
    std::vector<std::pair<std::string, std::string>> attributes;
    std::vector<Element> children;
    std::string text;
    std::size_t offset = 0;

    std::string_view local_name() const;
    std::optional<std::string> attribute(std::string_view local) const;
    const Element* child(std::string_view local) const;
    std::vector<const Element*> children_named(std::string_view local) const;
};

/// Parses a complete document. Throws ParseError carrying the byte offset
/// of the first malformation.
Element parse(std::string_view document);

/// Escapes &, <, >, " and ' for use in attribute values or text.
std::string escape(std::string_view raw);

}  // namespace mlmon::xml
