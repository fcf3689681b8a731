#include "rubric/testbank.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "rubric/error.hpp"
#include "rubric/gzip_io.hpp"
#include "rubric/llm_backend.hpp"
#include "rubric/text.hpp"

namespace rubric {

const TestBankEntry* QueryTestBank::find(const std::string& entry_id) const {
  for (const auto& e : items) {
    if (e.entry_id == entry_id) return &e;
  }
  return nullptr;
}

void QueryTestBank::validate() const {
  std::set<std::string> ids;
  for (const auto& e : items) {
    if (e.query_id != query_id) {
      throw ValidationError("entry '" + e.entry_id + "' belongs to query '" + e.query_id +
                            "', bank is for '" + query_id + "'");
    }
    if (e.kind != prompt_target) {
      throw ValidationError("entry '" + e.entry_id + "' is a " + to_string(e.kind) +
                            " in a " + to_string(prompt_target) + " bank");
    }
    if (e.text.empty()) throw ValidationError("entry '" + e.entry_id + "' has empty text");
    if (e.kind == EntryKind::nugget && e.choices) {
      throw ValidationError("nugget '" + e.entry_id + "' carries answer choices");
    }
    if (!ids.insert(e.entry_id).second) {
      throw ValidationError("duplicate entry id '" + e.entry_id + "'");
    }
  }
}

const QueryTestBank* find_bank(const std::vector<QueryTestBank>& banks, const std::string& query_id) {
  for (const auto& b : banks) {
    if (b.query_id == query_id) return &b;
  }
  return nullptr;
}

std::map<std::string, int> bank_ratings(const GradedPassage& passage, const GradeFilter& filter,
                                        const QueryTestBank* bank) {
  auto ratings = collect_ratings(passage, filter);
  if (!bank) return ratings;
  for (auto it = ratings.begin(); it != ratings.end();) {
    it = bank->find(it->first) ? std::next(it) : ratings.erase(it);
  }
  return ratings;
}

std::string entry_id_for(const std::string& query_id, const std::string& text) {
  if (text.empty()) throw ValidationError("entry text must not be empty");
  return query_id + "/" + text::md5_hex(text);
}

TestBankEntry make_entry(const std::string& query_id, EntryKind kind, const std::string& text,
                         std::vector<std::string> gold_answers) {
  TestBankEntry e;
  e.entry_id = entry_id_for(query_id, text);
  e.query_id = query_id;
  e.kind = kind;
  e.text = text;
  e.gold_answers = std::move(gold_answers);
  return e;
}

namespace {

std::vector<TestBankEntry>::iterator find_mut(QueryTestBank& bank, const std::string& id) {
  auto it = std::find_if(bank.items.begin(), bank.items.end(),
                         [&](const TestBankEntry& e) { return e.entry_id == id; });
  if (it == bank.items.end()) {
    throw NotFoundError("no entry '" + id + "' in test bank for query '" + bank.query_id + "'");
  }
  return it;
}

}  // namespace

QueryTestBank apply_edit(const QueryTestBank& bank, const BankEdit& edit) {
  QueryTestBank out = bank;
  if (const auto* add = std::get_if<AddEntry>(&edit)) {
    if (add->kind != out.prompt_target) {
      throw ValidationError("cannot add a " + to_string(add->kind) + " to a " +
                            to_string(out.prompt_target) + " bank");
    }
    auto entry = make_entry(out.query_id, add->kind, add->text, add->gold_answers);
    if (out.find(entry.entry_id)) throw ConflictError("entry '" + entry.entry_id + "' exists");
    out.items.push_back(std::move(entry));
  } else if (const auto* rm = std::get_if<RemoveEntry>(&edit)) {
    out.items.erase(find_mut(out, rm->entry_id));
  } else {
    const auto& rep = std::get<ReplaceEntry>(edit);
    auto it = find_mut(out, rep.entry_id);
    const std::string new_id = entry_id_for(out.query_id, rep.new_text);
    if (new_id != rep.entry_id && out.find(new_id)) {
      throw ConflictError("entry '" + new_id + "' exists");
    }
    it->entry_id = new_id;
    it->text = rep.new_text;
  }
  out.validate();
  return out;
}

const std::string& generation_template(GenerationStyle style, EntryKind target) {
  static const std::string kDlQuestions =
      "Break the query '{query_text}' into concise questions that must be answered. "
      "Generate 10 concise insightful questions that reveal whether information relevant for "
      "'{query_text}' was provided, showcasing a deep understanding of the subject matter. "
      "Avoid basic or introductory-level inquiries. Keep the questions short. {instruction}";
  static const std::string kDlNuggets =
      "Break the query '{query_text}' into concise nuggets that must be mentioned. "
      "Generate 10 concise insightful nuggets that reveal whether information relevant for "
      "'{query_text}' was provided, showcasing a deep understanding of the subject matter. "
      "Avoid basic or introductory-level nuggets. Keep nuggets to a maximum of 4 words. "
      "{instruction}";
  static const std::string kCarQuestions =
      "Explore the connection between '{query_title}' with a specific focus on the subtopic "
      "'{query_subtopic}'. Generate insightful questions that delve into advanced aspects of "
      "'{query_subtopic}', showcasing a deep understanding of the subject matter. "
      "Avoid basic or introductory-level inquiries. {instruction}";
  static const std::string kCarNuggets =
      "Explore the connection between '{query_title}' with a specific focus on the subtopic "
      "'{query_subtopic}'. Generate insightful nuggets (key facts) that delve into advanced "
      "aspects of '{query_subtopic}', showcasing a deep understanding of the subject matter. "
      "Avoid basic or introductory-level nuggets. Keep nuggets to a maximum of 4 words. "
      "{instruction}";
  if (style == GenerationStyle::trec_dl) {
    return target == EntryKind::question ? kDlQuestions : kDlNuggets;
  }
  return target == EntryKind::question ? kCarQuestions : kCarNuggets;
}

const std::string& generation_instruction(EntryKind target) {
  // The question variant has no closing brace; kept verbatim.
  static const std::string kQuestions =
      "Give the question set in the following JSON format: \n```json \n"
      "{ \"questions\" : [question_text_1, question_text_2, ...]\n```";
  static const std::string kNuggets =
      "Give the nugget set in the following JSON format: \n```json \n"
      "{ \"nuggets\" : [nugget_text_1, nugget_text_2, ...]} \n```";
  return target == EntryKind::question ? kQuestions : kNuggets;
}

std::string render_generation_prompt(const std::string& query_text, EntryKind target,
                                     const GenerationOptions& options) {
  const std::string& tmpl =
      options.template_text ? *options.template_text : generation_template(options.style, target);
  const std::string& title = options.query_title.empty() ? query_text : options.query_title;
  const std::string& subtopic =
      options.query_subtopic.empty() ? query_text : options.query_subtopic;
  return text::substitute(tmpl, {{"{query_text}", query_text},
                                 {"{query_title}", title},
                                 {"{query_subtopic}", subtopic},
                                 {"{instruction}", generation_instruction(target)}});
}

namespace {

std::optional<Json> try_parse(const std::string& s) {
  Json j = Json::parse(s, nullptr, false);
  if (j.is_discarded()) return std::nullopt;
  return j;
}

// Imitating the instruction, models often drop the closing brace;
// the bracketed array alone is then parsed.
std::optional<Json> parse_lenient(const std::string& s) {
  if (auto j = try_parse(s)) return j;
  const auto open = s.find('[');
  const auto close = s.rfind(']');
  if (open == std::string::npos || close == std::string::npos || close < open) return std::nullopt;
  return try_parse(s.substr(open, close - open + 1));
}

}  // namespace

std::vector<std::string> parse_generated_items(const std::string& completion, EntryKind target) {
  std::string body = completion;
  const auto fence = completion.find("```json");
  if (fence != std::string::npos) {
    const auto start = fence + 7;
    const auto end = completion.find("```", start);
    body = completion.substr(start, end == std::string::npos ? std::string::npos : end - start);
  }
  auto parsed = fence != std::string::npos ? parse_lenient(body) : try_parse(body);
  if (!parsed) throw GenerationParseError("completion holds no parseable JSON block", completion);

  const std::string key = target == EntryKind::question ? "questions" : "nuggets";
  const Json* list = nullptr;
  if (parsed->is_array()) {
    list = &*parsed;
  } else if (parsed->is_object() && parsed->contains(key) && (*parsed)[key].is_array()) {
    list = &(*parsed)[key];
  }
  if (!list) throw GenerationParseError("JSON block lacks a \"" + key + "\" array", completion);

  std::vector<std::string> items;
  for (const auto& v : *list) {
    if (!v.is_string()) throw GenerationParseError("non-string item in \"" + key + "\"", completion);
    items.push_back(v.get<std::string>());
  }
  return items;
}

QueryTestBank generate_test_bank(const std::string& query_id, const std::string& query_text,
                                 EntryKind target, Backend& backend,
                                 const GenerationOptions& options) {
  const std::string completion =
      backend.complete(render_generation_prompt(query_text, target, options));
  QueryTestBank bank;
  bank.query_id = query_id;
  bank.query_text = query_text;
  bank.prompt_target = target;
  for (const auto& item : parse_generated_items(completion, target)) {
    if (item.empty()) continue;
    auto entry = make_entry(query_id, target, item);
    // Identical texts would collide on entry_id; the first occurrence is kept.
    if (bank.find(entry.entry_id)) continue;
    bank.items.push_back(std::move(entry));
  }
  if (bank.items.empty()) {
    throw EmptyTestBankError("generation returned no items for query '" + query_id + "'");
  }
  bank.validate();
  return bank;
}

Json to_json(const QueryTestBank& bank) {
  const bool q = bank.prompt_target == EntryKind::question;
  Json items = Json::array();
  for (const auto& e : bank.items) {
    Json item = e.extra;
    item["query_id"] = e.query_id;
    item[q ? "question_id" : "nugget_id"] = e.entry_id;
    item[q ? "question_text" : "nugget_text"] = e.text;
    if (e.choices) item["choices"] = *e.choices;
    if (!e.gold_answers.empty()) item["gold_answers"] = e.gold_answers;
    items.push_back(std::move(item));
  }
  Json info = bank.info_extra;
  info["prompt_target"] = q ? "questions" : "nuggets";
  Json out = bank.extra;
  out["query_id"] = bank.query_id;
  out["query_text"] = bank.query_text;
  out["info"] = std::move(info);
  out["items"] = std::move(items);
  return out;
}

namespace {

std::string string_field(const Json& obj, const char* key) {
  if (!obj.contains(key)) throw MissingFieldError(key, "");
  if (!obj[key].is_string()) throw ValidationError(std::string("field '") + key + "' must be a string");
  return obj[key].get<std::string>();
}

std::vector<std::string> string_list(const Json& v, const char* key) {
  if (!v.is_array()) throw ValidationError(std::string("field '") + key + "' must be a list");
  std::vector<std::string> out;
  for (const auto& s : v) {
    if (!s.is_string()) throw ValidationError(std::string("field '") + key + "' holds a non-string");
    out.push_back(s.get<std::string>());
  }
  return out;
}

TestBankEntry entry_from_json(const Json& item, EntryKind bank_kind, const std::string& bank_query_id) {
  if (!item.is_object()) throw ValidationError("test bank item must be an object");
  const bool has_q = item.contains("question_text");
  const bool has_n = item.contains("nugget_text");
  if (has_q && has_n) {
    throw ValidationError("item carries both question_text and nugget_text");
  }
  const EntryKind kind = has_q ? EntryKind::question : has_n ? EntryKind::nugget : bank_kind;
  const bool q = kind == EntryKind::question;
  TestBankEntry e;
  e.kind = kind;
  e.query_id = item.contains("query_id") ? string_field(item, "query_id") : bank_query_id;
  e.text = string_field(item, q ? "question_text" : "nugget_text");
  const char* id_key = q ? "question_id" : "nugget_id";
  e.entry_id = item.contains(id_key) ? string_field(item, id_key) : entry_id_for(e.query_id, e.text);
  if (item.contains("choices")) {
    e.choices = string_list(item["choices"], "choices");
  }
  if (item.contains("gold_answers")) e.gold_answers = string_list(item["gold_answers"], "gold_answers");
  e.extra = item;
  for (const char* k : {"query_id", "question_id", "question_text", "nugget_id", "nugget_text",
                        "choices", "gold_answers"}) {
    e.extra.erase(k);
  }
  return e;
}

}  // namespace

QueryTestBank bank_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("test bank record must be a JSON object");
  QueryTestBank bank;
  bank.query_id = string_field(j, "query_id");
  bank.query_text = j.contains("query_text") ? string_field(j, "query_text") : std::string();
  if (j.contains("info")) {
    if (!j["info"].is_object()) throw ValidationError("field 'info' must be an object");
    bank.info_extra = j["info"];
    if (bank.info_extra.contains("prompt_target")) {
      bank.prompt_target = entry_kind_from_string(string_field(bank.info_extra, "prompt_target"));
      bank.info_extra.erase("prompt_target");
    }
  }
  if (!j.contains("items")) throw MissingFieldError("items", "");
  if (!j["items"].is_array()) throw ValidationError("field 'items' must be a list");
  bool kind_known = j.contains("info") && j["info"].contains("prompt_target");
  for (const auto& item : j["items"]) {
    auto e = entry_from_json(item, bank.prompt_target, bank.query_id);
    if (!kind_known) {
      bank.prompt_target = e.kind;
      kind_known = true;
    }
    bank.items.push_back(std::move(e));
  }
  bank.extra = j;
  for (const char* k : {"query_id", "query_text", "info", "items"}) bank.extra.erase(k);
  bank.validate();
  return bank;
}

std::vector<QueryTestBank> load_test_bank(const std::filesystem::path& path) {
  const std::string content = io::read_text_file(path);
  std::vector<QueryTestBank> banks;
  std::size_t line_no = 0;
  std::size_t offset = 0;
  while (offset < content.size()) {
    ++line_no;
    auto end = content.find('\n', offset);
    if (end == std::string::npos) end = content.size();
    const std::string line = content.substr(offset, end - offset);
    const std::size_t line_offset = offset;
    offset = end + 1;
    if (text::trim(line).empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ParseError("malformed JSON in test bank", line_no, line_offset);
    try {
      banks.push_back(bank_from_json(j));
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no, line_offset);
    }
  }
  return banks;
}

void save_test_bank(const std::vector<QueryTestBank>& banks, const std::filesystem::path& path,
                    std::optional<bool> compress) {
  std::string out;
  for (const auto& b : banks) {
    b.validate();
    out += to_json(b).dump();
    out += '\n';
  }
  io::write_file_atomic(path, out, compress.value_or(io::wants_gzip(path)));
}

std::pair<std::vector<QueryTestBank>, std::vector<QueryTestBank>> withhold_entries(
    const std::vector<QueryTestBank>& banks, double fraction, const std::string& seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw ValidationError("withhold fraction must lie in [0, 1]");
  }
  std::vector<QueryTestBank> shared;
  std::vector<QueryTestBank> withheld;
  for (const auto& bank : banks) {
    const auto n = bank.items.size();
    const auto w = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
    std::vector<std::pair<std::string, std::size_t>> order;
    for (std::size_t i = 0; i < n; ++i) {
      order.emplace_back(text::md5_hex(seed + "\n" + bank.items[i].entry_id), i);
    }
    std::sort(order.begin(), order.end());
    std::vector<bool> hide(n, false);
    for (std::size_t i = 0; i < w; ++i) hide[order[i].second] = true;

    QueryTestBank s = bank;
    QueryTestBank h = bank;
    s.items.clear();
    h.items.clear();
    for (std::size_t i = 0; i < n; ++i) (hide[i] ? h : s).items.push_back(bank.items[i]);
    shared.push_back(std::move(s));
    withheld.push_back(std::move(h));
  }
  return {std::move(shared), std::move(withheld)};
}

}  // namespace rubric
