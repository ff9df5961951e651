#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dgadet {

enum class Label : int { benign = 0, dga = 1 };

// One labeled, year-tagged domain. raw is the string as collected or
// generated; sld is filled by the preprocess stage (empty before).
struct DomainRecord {
    std::string raw;
    std::string sld;
    Label label = Label::benign;
    std::string family = "benign";
    int year = 0;

    // The string fed to the tokenizers.
    const std::string& text() const { return sld.empty() ? raw : sld; }

    bool operator==(const DomainRecord&) const = default;
};

enum class FamilyScheme { char_based, word_based };

// Generator parameters for one synthetic DGA family.
struct FamilySpec {
    std::string name;
    FamilyScheme scheme = FamilyScheme::char_based;
    int first_epoch = 0;
    uint64_t seed = 0;
    int len_min = 8;           // char_based: string length range
    int len_max = 16;
    std::string alphabet;      // char_based only; empty = a-z0-9
    int words_min = 2;         // word_based: words per domain
    int words_max = 3;
    std::string separator;     // word_based: between words ("" or "-")
    std::string dictionary;    // word_based: dictionary id
};

}  // namespace dgadet
