#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace syncog::text {

/// Decodes UTF-8 into code points. Invalid bytes decode as U+FFFD.
std::vector<char32_t> decode_utf8(std::string_view s);
void append_utf8(std::string& out, char32_t cp);
std::string encode_utf8(const std::vector<char32_t>& cps);

std::string to_lower_ascii(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::vector<std::string> split_whitespace(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool starts_with_ci(std::string_view s, std::string_view prefix);

bool is_cjk(char32_t cp);
/// ASCII or common Unicode punctuation (including CJK punctuation).
bool is_punct(char32_t cp);
bool is_space(char32_t cp);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace syncog::text
