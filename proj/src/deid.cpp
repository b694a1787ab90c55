#include "ontoext/deid.hpp"

#include <algorithm>
#include <cctype>

#include "ontoext/errors.hpp"
#include "ontoext/log.hpp"
#include "ontoext/strutil.hpp"

namespace ontoext {

namespace {

struct CategoryNames {
  PhiCategory category;
  const char* canonical;
};

constexpr CategoryNames kNames[] = {
    {PhiCategory::Person, "person"},
    {PhiCategory::Location, "location"},
    {PhiCategory::Organization, "organization"},
    {PhiCategory::Age, "age"},
    {PhiCategory::PhoneNumber, "phone number"},
    {PhiCategory::Email, "email"},
    {PhiCategory::DateAndTime, "date and time"},
    {PhiCategory::Zip, "zip"},
    {PhiCategory::Profession, "profession"},
    {PhiCategory::Username, "username"},
    {PhiCategory::Id, "id"},
    {PhiCategory::Url, "url"},
};

struct Alias {
  const char* name;
  PhiCategory category;
};

constexpr Alias kAliases[] = {
    {"name", PhiCategory::Person},        {"patient name", PhiCategory::Person},
    {"person name", PhiCategory::Person}, {"people", PhiCategory::Person},
    {"address", PhiCategory::Location},   {"city", PhiCategory::Location},
    {"state", PhiCategory::Location},     {"country", PhiCategory::Location},
    {"organisation", PhiCategory::Organization},
    {"hospital", PhiCategory::Organization},
    {"company", PhiCategory::Organization},
    {"phone", PhiCategory::PhoneNumber},  {"telephone", PhiCategory::PhoneNumber},
    {"phone_number", PhiCategory::PhoneNumber},
    {"fax", PhiCategory::PhoneNumber},
    {"e-mail", PhiCategory::Email},       {"email address", PhiCategory::Email},
    {"date", PhiCategory::DateAndTime},   {"time", PhiCategory::DateAndTime},
    {"datetime", PhiCategory::DateAndTime},
    {"date_and_time", PhiCategory::DateAndTime},
    {"date and time.", PhiCategory::DateAndTime},
    {"zip code", PhiCategory::Zip},       {"zipcode", PhiCategory::Zip},
    {"postal code", PhiCategory::Zip},
    {"occupation", PhiCategory::Profession},
    {"job", PhiCategory::Profession},
    {"user name", PhiCategory::Username}, {"login", PhiCategory::Username},
    {"mrn", PhiCategory::Id},             {"medical record number", PhiCategory::Id},
    {"identifier", PhiCategory::Id},      {"record id", PhiCategory::Id},
    {"ssn", PhiCategory::Id},
    {"website", PhiCategory::Url},        {"web address", PhiCategory::Url},
    {"link", PhiCategory::Url},
};

std::string normalize_key(const std::string& name) {
  std::string key = to_lower(collapse_ws(name));
  std::replace(key.begin(), key.end(), '_', ' ');
  return key;
}

// Case-insensitive find over the original text starting at `from`.
std::size_t ifind(const std::string& haystack, const std::string& needle, std::size_t from) {
  if (needle.empty() || from > haystack.size()) return std::string::npos;
  auto lower = [](unsigned char c) { return std::tolower(c); };
  for (std::size_t i = from; i + needle.size() <= haystack.size(); ++i) {
    std::size_t j = 0;
    while (j < needle.size() &&
           lower(haystack[i + j]) == lower(static_cast<unsigned char>(needle[j])))
      ++j;
    if (j == needle.size()) return i;
  }
  return std::string::npos;
}

}  // namespace

std::string phi_category_name(PhiCategory category) {
  for (const auto& entry : kNames)
    if (entry.category == category) return entry.canonical;
  throw argument_error("unknown identifier category value");
}

std::optional<PhiCategory> phi_category_from(const std::string& name) {
  std::string key = normalize_key(name);
  for (const auto& entry : kNames)
    if (key == entry.canonical) return entry.category;
  for (const auto& alias : kAliases)
    if (key == normalize_key(alias.name)) return alias.category;
  return std::nullopt;
}

std::string phi_placeholder(PhiCategory category) {
  std::string name = phi_category_name(category);
  for (char& c : name) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return "[" + name + "]";
}

PhiInventory::PhiInventory() {
  for (PhiCategory category : kAllPhiCategories) found[category];
}

std::size_t PhiInventory::total() const {
  std::size_t n = 0;
  for (const auto& [category, strings] : found) n += strings.size();
  return n;
}

nlohmann::json PhiInventory::to_json() const {
  nlohmann::ordered_json out;
  for (PhiCategory category : kAllPhiCategories)
    out[phi_category_name(category)] = found.at(category);
  return out;
}

PhiInventory PhiInventory::from_json(const nlohmann::json& value) {
  PhiInventory inventory;
  if (!value.is_object()) throw format_error("identifier inventory must be a JSON object");
  for (const auto& [key, entry] : value.items()) {
    auto category = phi_category_from(key);
    if (!category) {
      warn("ignoring unknown identifier category \"" + key + "\"");
      continue;
    }
    for (const auto& item : entry) {
      std::string s = item.is_string() ? item.get<std::string>() : item.dump();
      if (!trim(s).empty()) inventory[*category].push_back(trim(s));
    }
  }
  return inventory;
}

ChatExchange phi_exchange(const ClinicalNote& note) {
  ChatExchange exchange;
  exchange.system_prompt =
      "You are a meticulous clinical data privacy assistant. You find every "
      "piece of personally identifying information in clinical notes.";
  std::string categories;
  for (PhiCategory category : kAllPhiCategories) {
    if (!categories.empty()) categories += ", ";
    categories += phi_category_name(category);
  }
  exchange.user_prompt =
      "List every personal identifier that appears in the clinical note below. "
      "Use exactly these categories: " + categories + ".\n"
      "Respond with a single JSON object mapping each category name to a list "
      "of the exact strings found in the note. Use an empty list for "
      "categories with no matches. Copy strings verbatim from the note.\n\n"
      "Note:\n" + note.text;
  return exchange;
}

PhiInventory extract_phi(ModelGateway& gateway, const ClinicalNote& note) {
  nlohmann::json payload =
      request_structured(gateway, phi_exchange(note), PayloadShape::MappingOfLists);

  PhiInventory inventory;
  for (const auto& [key, entry] : payload.items()) {
    auto category = phi_category_from(key);
    if (!category) {
      warn("note " + note.id + ": ignoring unknown identifier category \"" + key + "\"");
      continue;
    }
    for (const auto& item : entry) {
      std::string s = trim(item.get<std::string>());
      if (s.empty()) continue;
      // Anything not actually present in the note is an invention; keeping it
      // would punch placeholder holes in unrelated text.
      if (ifind(note.text, s, 0) == std::string::npos) {
        warn("note " + note.id + ": dropping \"" + s + "\" (" +
             phi_category_name(*category) + "): not found in note");
        continue;
      }
      inventory[*category].push_back(s);
    }
  }
  return inventory;
}

std::string mask(const std::string& text, const PhiInventory& inventory, MaskStats* stats) {
  struct Needle {
    PhiCategory category;
    std::string value;
  };
  std::vector<Needle> needles;
  for (PhiCategory category : kAllPhiCategories)
    for (const std::string& value : inventory.at(category))
      if (!value.empty()) needles.push_back({category, value});
  // Longest first so "John Maxwell" claims its span before "John" can split it.
  std::stable_sort(needles.begin(), needles.end(),
                   [](const Needle& a, const Needle& b) {
                     return a.value.size() > b.value.size();
                   });

  struct Span {
    std::size_t begin, end;
    PhiCategory category;
  };
  std::vector<Span> claimed;
  auto overlaps = [&](std::size_t begin, std::size_t end) {
    for (const Span& span : claimed)
      if (begin < span.end && span.begin < end) return true;
    return false;
  };

  for (const Needle& needle : needles) {
    std::size_t from = 0;
    for (;;) {
      std::size_t at = ifind(text, needle.value, from);
      if (at == std::string::npos) break;
      std::size_t end = at + needle.value.size();
      if (!overlaps(at, end)) claimed.push_back({at, end, needle.category});
      from = at + 1;
    }
  }
  std::sort(claimed.begin(), claimed.end(),
            [](const Span& a, const Span& b) { return a.begin < b.begin; });

  std::string out;
  out.reserve(text.size());
  std::size_t cursor = 0;
  for (const Span& span : claimed) {
    out.append(text, cursor, span.begin - cursor);
    out += phi_placeholder(span.category);
    cursor = span.end;
    if (stats) {
      ++stats->spans_masked;
      ++stats->per_category[span.category];
    }
  }
  out.append(text, cursor, std::string::npos);
  return out;
}

namespace {

// Multiset of lowercase strings per category for one note.
std::map<PhiCategory, std::map<std::string, std::size_t>> bag_of(const PhiInventory& inventory) {
  std::map<PhiCategory, std::map<std::string, std::size_t>> bag;
  for (PhiCategory category : kAllPhiCategories)
    for (const std::string& value : inventory.at(category))
      ++bag[category][to_lower(collapse_ws(value))];
  return bag;
}

// Zero-denominator convention: an empty side scores 1 only when the other
// side is empty too. This keeps swapping predicted and gold an exact
// precision/recall mirror.
double ratio(std::size_t hits, std::size_t denom, std::size_t other_denom) {
  if (denom == 0) return other_denom == 0 ? 1.0 : 0.0;
  return static_cast<double>(hits) / static_cast<double>(denom);
}

double f1_of(double precision, double recall) {
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

PhiEvaluation evaluate_phi(const std::map<std::string, PhiInventory>& predicted,
                           const std::map<std::string, PhiInventory>& gold) {
  for (const auto& [note_id, inventory] : predicted)
    if (gold.find(note_id) == gold.end())
      throw lookup_error("no gold identifiers for note " + note_id);

  PhiEvaluation eval;
  double macro_p = 0.0, macro_r = 0.0, macro_f = 0.0;
  std::size_t notes = 0;

  static const PhiInventory kEmpty;
  for (const auto& [note_id, gold_inventory] : gold) {
    auto it = predicted.find(note_id);
    const PhiInventory& pred_inventory = it != predicted.end() ? it->second : kEmpty;

    auto pred_bag = bag_of(pred_inventory);
    auto gold_bag = bag_of(gold_inventory);

    std::size_t tp = 0;
    for (const auto& [category, strings] : pred_bag)
      for (const auto& [value, count] : strings) {
        auto git = gold_bag.find(category);
        if (git == gold_bag.end()) continue;
        auto vit = git->second.find(value);
        if (vit != git->second.end()) tp += std::min(count, vit->second);
      }
    std::size_t pred_n = pred_inventory.total();
    std::size_t gold_n = gold_inventory.total();

    eval.true_positives += tp;
    eval.predicted += pred_n;
    eval.gold += gold_n;

    double p = ratio(tp, pred_n, gold_n);
    double r = ratio(tp, gold_n, pred_n);
    macro_p += p;
    macro_r += r;
    macro_f += f1_of(p, r);
    ++notes;
  }

  eval.micro.precision = ratio(eval.true_positives, eval.predicted, eval.gold);
  eval.micro.recall = ratio(eval.true_positives, eval.gold, eval.predicted);
  eval.micro.f1 = f1_of(eval.micro.precision, eval.micro.recall);
  if (notes > 0) {
    eval.macro_avg.precision = macro_p / static_cast<double>(notes);
    eval.macro_avg.recall = macro_r / static_cast<double>(notes);
    eval.macro_avg.f1 = macro_f / static_cast<double>(notes);
  }
  return eval;
}

}  // namespace ontoext
