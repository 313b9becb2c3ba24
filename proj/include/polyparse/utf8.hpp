#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace polyparse::utf8 {

bool valid(std::string_view text);

// Throws InputError with the 1-based line of the first invalid sequence.
void require_valid(std::string_view text, const char* what);

// Splits into one string per code point. Input must be valid UTF-8.
std::vector<std::string> code_points(std::string_view word);

}  // namespace polyparse::utf8
