#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace byokg::text {

// Unicode NFC normalization. Invalid UTF-8 bytes pass through replacement
// characters rather than throwing.
std::string nfc(std::string_view s);

// Full Unicode case folding (locale-independent).
std::string casefold(std::string_view s);

std::string trim(std::string_view s);

// Canonical comparison key: NFC + casefold + trim + inner whitespace squashed
// to single spaces.
std::string normalize_key(std::string_view s);

// Splits on newlines; no trimming.
std::vector<std::string> split_lines(std::string_view s);

// Lowercased alphanumeric runs of the normalized text.
std::vector<std::string> word_tokens(std::string_view s);

// Whitespace-delimited token count (used for prompt budgets).
std::size_t count_tokens(std::string_view s);

// Decodes UTF-8 into codepoints; malformed bytes become U+FFFD.
std::vector<char32_t> utf8_codepoints(std::string_view s);

// Codepoint-level edit distance.
std::size_t levenshtein(std::string_view a, std::string_view b);

// 1 - distance/max(len); 1.0 when both empty, 0.0 when exactly one is empty.
double levenshtein_ratio(std::string_view a, std::string_view b);

// Fuzzy similarity in [0,1]: token-set variant of the edit-distance ratio.
// Tokens of both inputs are split into shared and residual parts and the best
// of the three pairwise ratios (shared vs shared+residual combinations) wins.
double token_set_ratio(std::string_view a, std::string_view b);

// FNV-1a 64-bit, the stable hash used for embeddings and cache keys.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 1469598103934665603ull);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

bool iequals(std::string_view a, std::string_view b);  // ASCII case-insensitive

}  // namespace byokg::text
