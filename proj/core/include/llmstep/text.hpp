#pragma once

#include <string>
#include <string_view>

namespace llmstep {

[[nodiscard]] std::string_view trim(std::string_view s) noexcept;
[[nodiscard]] std::string_view trim_right(std::string_view s) noexcept;

/// Collapses runs of spaces and tabs into one space and trims both ends.
/// This is the identity used for deduplicating tactics and keying states.
[[nodiscard]] std::string normalize_whitespace(std::string_view s);

[[nodiscard]] bool is_valid_utf8(std::string_view s) noexcept;

[[nodiscard]] inline bool starts_with(std::string_view s, std::string_view prefix) noexcept {
    return s.substr(0, prefix.size()) == prefix;
}

} // namespace llmstep
