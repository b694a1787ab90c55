#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ontoext/gateway.hpp"

namespace ontoext {

struct ClinicalNote {
  std::string id;
  std::string text;
};

// The closed set of personal-identifier categories the masking pass removes.
enum class PhiCategory {
  Person,
  Location,
  Organization,
  Age,
  PhoneNumber,
  Email,
  DateAndTime,
  Zip,
  Profession,
  Username,
  Id,
  Url,
};

inline constexpr std::array<PhiCategory, 12> kAllPhiCategories = {
    PhiCategory::Person,     PhiCategory::Location,    PhiCategory::Organization,
    PhiCategory::Age,        PhiCategory::PhoneNumber, PhiCategory::Email,
    PhiCategory::DateAndTime, PhiCategory::Zip,        PhiCategory::Profession,
    PhiCategory::Username,   PhiCategory::Id,          PhiCategory::Url,
};

// Canonical lowercase name, e.g. "phone number", "date and time".
std::string phi_category_name(PhiCategory category);

// Accepts canonical names plus common aliases ("name", "zipcode", "mrn", ...).
// nullopt when the string matches nothing known.
std::optional<PhiCategory> phi_category_from(const std::string& name);

// "[PHONE NUMBER]" and friends: the text that replaces a masked span.
std::string phi_placeholder(PhiCategory category);

// Every category always has an entry; untouched ones stay empty so reports
// and metrics never have to special-case absence.
struct PhiInventory {
  std::map<PhiCategory, std::vector<std::string>> found;

  PhiInventory();
  std::vector<std::string>& operator[](PhiCategory category) { return found.at(category); }
  const std::vector<std::string>& at(PhiCategory category) const { return found.at(category); }
  std::size_t total() const;

  nlohmann::json to_json() const;
  static PhiInventory from_json(const nlohmann::json& value);
};

// Prompt pair asking the model to list every identifier in the note, keyed
// by category name.
ChatExchange phi_exchange(const ClinicalNote& note);

// Runs the identifier inventory over one note. Strings the model invented
// (not present in the note, case-insensitive) are dropped with a warning, as
// are unknown category keys.
PhiInventory extract_phi(ModelGateway& gateway, const ClinicalNote& note);

struct MaskStats {
  std::size_t spans_masked = 0;
  std::map<PhiCategory, std::size_t> per_category;
};

// Replaces each inventory string, longest first, with its category
// placeholder. Matching is case-insensitive against the original text; spans
// already claimed are not re-matched, and non-identifier bytes are preserved.
std::string mask(const std::string& text, const PhiInventory& inventory,
                 MaskStats* stats = nullptr);

struct PrfScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct PhiEvaluation {
  PrfScores micro;
  PrfScores macro_avg;  // unweighted mean over notes
  std::size_t true_positives = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
};

// Inventory-vs-gold comparison as multisets of (category, lowercase string)
// pairs per note. Notes missing from gold raise lookup_error; notes missing
// from predictions count as all-miss.
PhiEvaluation evaluate_phi(const std::map<std::string, PhiInventory>& predicted,
                           const std::map<std::string, PhiInventory>& gold);

}  // namespace ontoext
