#include "mlmon/xml.hpp"

#include <expat.h>

#include <limits>
#include <memory>

#include "mlmon/common.hpp"

namespace mlmon::xml {

std::string_view Element::local_name() const {
    std::string_view n = name;
    const auto colon = n.find(':');
    return colon == std::string_view::npos ? n : n.substr(colon + 1);
}

std::optional<std::string> Element::attribute(std::string_view local) const {
    for (const auto& [k, v] : attributes) {
        std::string_view key = k;
        if (const auto colon = key.find(':'); colon != std::string_view::npos)
            key = key.substr(colon + 1);
        if (key == local) return v;
    }
    return std::nullopt;
}

const Element* Element::child(std::string_view local) const {
    for (const auto& c : children)
        if (c.local_name() == local) return &c;
    return nullptr;
}

std::vector<const Element*> Element::children_named(std::string_view local) const {
    std::vector<const Element*> out;
    for (const auto& c : children)
        if (c.local_name() == local) out.push_back(&c);
    return out;
}

namespace {

/// Builds the DOM from expat callbacks.
struct Builder {
    XML_Parser parser;
    Element root;
    std::vector<Element*> open;
    bool has_root = false;

    static void on_start(void* data, const XML_Char* name, const XML_Char** attrs) {
        auto& b = *static_cast<Builder*>(data);
        Element* el = nullptr;
        if (b.open.empty()) {
            el = &b.root;
            b.has_root = true;
        } else {
            el = &b.open.back()->children.emplace_back();
        }
        el->name = name;
        el->offset = static_cast<std::size_t>(XML_GetCurrentByteIndex(b.parser));
        for (const XML_Char** a = attrs; *a; a += 2) el->attributes.emplace_back(a[0], a[1]);
        b.open.push_back(el);
    }

    static void on_end(void* data, const XML_Char*) { static_cast<Builder*>(data)->open.pop_back(); }

    static void on_text(void* data, const XML_Char* s, int len) {
        auto& b = *static_cast<Builder*>(data);
        if (!b.open.empty()) b.open.back()->text.append(s, static_cast<std::size_t>(len));
    }
};

}  // namespace

Element parse(std::string_view document) {
    std::unique_ptr<XML_ParserStruct, decltype(&XML_ParserFree)> parser(XML_ParserCreate(nullptr), &XML_ParserFree);
    if (!parser) throw Error("xml: cannot allocate parser");
    Builder b{parser.get(), {}, {}, false};
    XML_SetUserData(parser.get(), &b);
    XML_SetElementHandler(parser.get(), &Builder::on_start, &Builder::on_end);
    XML_SetCharacterDataHandler(parser.get(), &Builder::on_text);
    if (document.size() > static_cast<std::size_t>(std::numeric_limits<int>::max()))
        throw ParseError(0, "xml: document too large");
    if (XML_Parse(parser.get(), document.data(), static_cast<int>(document.size()), XML_TRUE) != XML_STATUS_OK) {
        const auto at = XML_GetCurrentByteIndex(parser.get());
        throw ParseError(at < 0 ? 0 : static_cast<std::size_t>(at),
                         std::string("xml: ") + XML_ErrorString(XML_GetErrorCode(parser.get())));
    }
    if (!b.has_root) throw ParseError(0, "xml: expected root element");
    return std::move(b.root);
}

std::string escape(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (char c : raw) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace mlmon::xml
