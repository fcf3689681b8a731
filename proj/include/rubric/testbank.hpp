#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rubric/core_model.hpp"

namespace rubric {

class Backend;

/// One exam question or nugget.
struct TestBankEntry {
  std::string entry_id;  // "<query_id>/<md5 of text>"
  std::string query_id;
  EntryKind kind = EntryKind::question;
  std::string text;
  std::optional<std::vector<std::string>> choices;  // questions only
  std::vector<std::string> gold_answers;
  Json extra = Json::object();

  bool operator==(const TestBankEntry&) const = default;
};

struct QueryTestBank {
  std::string query_id;
  std::string query_text;
  EntryKind prompt_target = EntryKind::question;
  std::vector<TestBankEntry> items;
  Json info_extra = Json::object();
  Json extra = Json::object();

  const TestBankEntry* find(const std::string& entry_id) const;
  /// Throws ValidationError when any bank invariant is violated.
  void validate() const;

  bool operator==(const QueryTestBank&) const = default;
};

const QueryTestBank* find_bank(const std::vector<QueryTestBank>& banks, const std::string& query_id);

/// collect_ratings restricted to the entries of `bank`; all ratings when
/// `bank` is null.
std::map<std::string, int> bank_ratings(const GradedPassage& passage, const GradeFilter& filter,
                                        const QueryTestBank* bank);

/// Deterministic entry identifier: query id, '/', MD5 of the exact text.
std::string entry_id_for(const std::string& query_id, const std::string& text);

TestBankEntry make_entry(const std::string& query_id, EntryKind kind, const std::string& text,
                         std::vector<std::string> gold_answers = {});

// Edits applied by reviewers. Each returns a new bank; the input is untouched.
struct AddEntry {
  std::string text;
  EntryKind kind = EntryKind::question;
  std::vector<std::string> gold_answers;
};
struct RemoveEntry {
  std::string entry_id;
};
struct ReplaceEntry {
  std::string entry_id;
  std::string new_text;
};
using BankEdit = std::variant<AddEntry, RemoveEntry, ReplaceEntry>;

QueryTestBank apply_edit(const QueryTestBank& bank, const BankEdit& edit);

// Generation.
enum class GenerationStyle { trec_dl, trec_car };

struct GenerationOptions {
  GenerationStyle style = GenerationStyle::trec_dl;
  std::string query_title;     // trec_car only
  std::string query_subtopic;  // trec_car only
  /// Overrides the built-in template; placeholders {query_text},
  /// {query_title}, {query_subtopic}, {instruction}.
  std::optional<std::string> template_text;
};

/// Built-in generation template (without the JSON instruction block).
const std::string& generation_template(GenerationStyle style, EntryKind target);
/// JSON-format instruction appended through the {instruction} placeholder.
const std::string& generation_instruction(EntryKind target);

std::string render_generation_prompt(const std::string& query_text, EntryKind target,
                                     const GenerationOptions& options = {});

/// Extracts the item list from a completion: the first ```json fenced block,
/// else the whole completion parsed as JSON.
std::vector<std::string> parse_generated_items(const std::string& completion, EntryKind target);

QueryTestBank generate_test_bank(const std::string& query_id, const std::string& query_text,
                                 EntryKind target, Backend& backend,
                                 const GenerationOptions& options = {});

// Persistence: JSON-lines, one bank per line, optionally gzip-compressed.
Json to_json(const QueryTestBank& bank);
QueryTestBank bank_from_json(const Json& j);
std::vector<QueryTestBank> load_test_bank(const std::filesystem::path& path);
void save_test_bank(const std::vector<QueryTestBank>& banks, const std::filesystem::path& path,
                    std::optional<bool> compress = std::nullopt);

/// Splits banks into a shareable part and a withheld part. Per query,
/// ceil(fraction * n) entries are withheld, chosen by a seeded digest of the
/// entry id, so the split is reproducible.
std::pair<std::vector<QueryTestBank>, std::vector<QueryTestBank>> withhold_entries(
    const std::vector<QueryTestBank>& banks, double fraction, const std::string& seed);

}  // namespace rubric
