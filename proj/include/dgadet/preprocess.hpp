#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dgadet/types.hpp"

namespace dgadet {

enum class RejectReason { none, invalid_char, empty_sld };

// Typed outcome for normalize/extract; rejection is a value, not a throw.
struct SldOutcome {
    std::string value;
    RejectReason reject = RejectReason::none;
    char offending = '\0';

    bool ok() const { return reject == RejectReason::none; }
};

// Curated TLD / ccTLD-block suffixes. Multi-label blocks (co.kr, blogspot.com)
// are stripped as a unit; single labels fall under the final-dot rule anyway.
struct SuffixTable {
    std::set<std::string> tlds;
    std::set<std::string> cctld_blocks;

    static SuffixTable load(const std::string& path);
    static SuffixTable builtin();
    static const std::string& builtin_text();
};

// Lowercase; accept only [a-z0-9.-]. Underscores and anything else reject.
SldOutcome normalize(const std::string& raw);

// Rule order: (i) longest ccTLD block match ".<block>" stripped as a unit,
// (ii) otherwise strip the substring after the final dot, (iii) no dot:
// unchanged. Empty result rejects with empty_sld.
SldOutcome extract_effective_sld(const std::string& domain, const SuffixTable& table);

// One record per unique (sld, label); earliest year wins. When a benign and
// a DGA record share an sld, the benign one is dropped. Output is ordered by
// (year, sld, label).
std::vector<DomainRecord> dedupe_merge(const std::vector<std::vector<DomainRecord>>& sources);

// Full stage over a record list: normalize + extract + dedupe. Records whose
// domain is rejected are dropped and counted.
struct PreprocessStats {
    size_t input = 0;
    size_t rejected_invalid_char = 0;
    size_t rejected_empty_sld = 0;
    size_t output = 0;
};
std::vector<DomainRecord> preprocess_records(const std::vector<DomainRecord>& records,
                                             const SuffixTable& table, PreprocessStats* stats);

}  // namespace dgadet
