#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace mlmon {

/// Minimal absolute-URL value: scheme://host[:port]/path[?query].
struct Url {
    std::string scheme;
    std::string host;
    std::optional<int> port;
    std::string path = "/";
    std::string query;

    /// scheme://host[:port]
    std::string origin() const;
    /// path[?query]
    std::string target() const;
    std::string str() const;
    int effective_port() const;

    friend bool operator==(const Url&, const Url&) = default;
};

/// Parses an absolute URL; nullopt if scheme or authority is missing.
std::optional<Url> parse_absolute_url(std::string_view text);

bool is_absolute_url(std::string_view text);

/// RFC 3986 reference resolution restricted to the forms found in MPDs:
/// absolute, scheme-relative, absolute-path, and relative-path references.
std::string resolve_url(std::string_view base, std::string_view reference);

}  // namespace mlmon
