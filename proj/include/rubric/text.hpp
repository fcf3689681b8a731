#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rubric::text {

/// Lowercase hex MD5 of the raw bytes.
std::string md5_hex(std::string_view bytes);

/// Whitespace-delimited token count; the workbench's prompt-budget unit.
std::size_t word_count(std::string_view s);

std::vector<std::string_view> split_words(std::string_view s);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
/// Trims and replaces every whitespace run by one space.
std::string collapse_whitespace(std::string_view s);

/// Lowercased alphanumeric tokens of length >= 2 that are not stopwords.
std::vector<std::string> content_words(std::string_view s);
bool is_stopword(std::string_view lowered_word);

/// Splits after '.', '!' or '?' followed by whitespace. Pieces keep their
/// terminal punctuation; surrounding whitespace is dropped.
std::vector<std::string> split_sentences(std::string_view s);

/// Porter stemmer (the revised reference implementation). Expects a
/// lowercase word; words of length <= 2 are returned unchanged.
std::string porter_stem(std::string_view word);

/// Character-level Levenshtein distance over bytes.
std::size_t levenshtein(std::string_view a, std::string_view b);

/// 1 - distance / max(len); two empty strings are identical (1.0).
double normalized_similarity(std::string_view a, std::string_view b);

using Substitution = std::pair<std::string_view, std::string_view>;

/// Replaces each placeholder (e.g. "{context}") in one left-to-right pass;
/// substituted text is never rescanned.
std::string substitute(std::string_view tmpl, std::initializer_list<Substitution> subs);

}  // namespace rubric::text
