#include "mlmon/url.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <vector>

namespace mlmon {

std::string Url::origin() const {
    std::string out = scheme + "://" + host;
    if (port) out += ":" + std::to_string(*port);
    return out;
}

std::string Url::target() const { return query.empty() ? path : path + "?" + query; }

std::string Url::str() const { return origin() + target(); }

int Url::effective_port() const {
    if (port) return *port;
    return scheme == "https" ? 443 : 80;
}

std::optional<Url> parse_absolute_url(std::string_view text) {
    const auto colon = text.find("://");
    if (colon == std::string_view::npos || colon == 0) return std::nullopt;
    Url url;
    url.scheme = std::string(text.substr(0, colon));
    for (char& c : url.scheme) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '+' && c != '-' && c != '.')
            return std::nullopt;
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    std::string_view rest = text.substr(colon + 3);
    const auto auth_end = rest.find_first_of("/?#");
    std::string_view authority = rest.substr(0, auth_end);
    if (authority.empty()) return std::nullopt;
    if (const auto at = authority.rfind('@'); at != std::string_view::npos)
        authority = authority.substr(at + 1);
    const auto pcolon = authority.rfind(':');
    if (pcolon != std::string_view::npos && authority.find(']') == std::string_view::npos) {
        int port = 0;
        const auto digits = authority.substr(pcolon + 1);
        auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
        if (ec != std::errc{} || p != digits.data() + digits.size() || port <= 0 || port > 65535)
            return std::nullopt;
        url.port = port;
        url.host = std::string(authority.substr(0, pcolon));
    } else {
        url.host = std::string(authority);
    }
    if (url.host.empty()) return std::nullopt;
    if (auth_end == std::string_view::npos) return url;
    std::string_view tail = rest.substr(auth_end);
    if (const auto hash = tail.find('#'); hash != std::string_view::npos) tail = tail.substr(0, hash);
    const auto q = tail.find('?');
    url.path = std::string(tail.substr(0, q));
    if (url.path.empty()) url.path = "/";
    if (q != std::string_view::npos) url.query = std::string(tail.substr(q + 1));
    return url;
}

bool is_absolute_url(std::string_view text) { return parse_absolute_url(text).has_value(); }

namespace {

std::string remove_dot_segments(const std::string& path) {
    std::vector<std::string> out;
    std::size_t i = 0;
    const bool leading = !path.empty() && path.front() == '/';
    const bool trailing = !path.empty() && (path.back() == '/' || path.ends_with("/.") ||
                                             path.ends_with("/.."));
    while (i <= path.size()) {
        const auto j = path.find('/', i);
        const auto seg = path.substr(i, j == std::string::npos ? std::string::npos : j - i);
        if (seg == "..") {
            if (!out.empty()) out.pop_back();
        } else if (!seg.empty() && seg != ".") {
            out.push_back(seg);
        }
        if (j == std::string::npos) break;
        i = j + 1;
    }
    std::string result = leading ? "/" : "";
    for (std::size_t k = 0; k < out.size(); ++k) {
        if (k) result += '/';
        result += out[k];
    }
    if (trailing && !out.empty()) result += '/';
    return result;
}

}  // namespace

std::string resolve_url(std::string_view base, std::string_view reference) {
    if (is_absolute_url(reference)) return std::string(reference);
    const auto parsed = parse_absolute_url(base);
    if (!parsed) return std::string(reference);
    Url url = *parsed;
    url.query.clear();
    if (reference.starts_with("//")) return url.scheme + ":" + std::string(reference);
    std::string ref(reference);
    std::string query;
    if (const auto q = ref.find('?'); q != std::string::npos) {
        query = ref.substr(q + 1);
        ref.resize(q);
    }
    if (ref.empty()) {
        url.query = query.empty() ? parsed->query : query;
        return url.str();
    }
    if (ref.front() == '/') {
        url.path = remove_dot_segments(ref);
    } else {
        const auto slash = url.path.rfind('/');
        const std::string dir = slash == std::string::npos ? "/" : url.path.substr(0, slash + 1);
        url.path = remove_dot_segments(dir + ref);
    }
    if (url.path.empty()) url.path = "/";
    url.query = query;
    return url.str();
}

}  // namespace mlmon
