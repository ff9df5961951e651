#include "dgadet/preprocess.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "dgadet/errors.hpp"

namespace dgadet {

namespace {

// ~60 curated suffixes: common gTLDs, multi-label ccTLD blocks, and platform
// SLDs (blogspot/wordpress/ddns/myftp style) treated as strippable noise.
const char* kBuiltinSuffixes = R"(# curated suffix table
# single-label TLDs
com
net
org
info
biz
io
co
me
tv
cc
xyz
top
site
online
club
shop
app
dev
uk
de
fr
jp
kr
cn
ru
br
in
au
us
ca
it
nl
es
pl
eu
# ccTLD blocks (stripped as a unit)
co.kr
or.kr
go.kr
ac.kr
co.uk
org.uk
ac.uk
gov.uk
com.au
net.au
org.au
co.jp
ne.jp
or.jp
ac.jp
com.cn
net.cn
org.cn
com.br
net.br
org.br
co.in
net.in
org.in
com.tw
com.mx
com.ar
co.za
com.tr
com.ru
# platform SLDs categorized as noise
blogspot.com
wordpress.com
tumblr.com
github.io
ddns.net
myftp.org
myftp.biz
no-ip.org
dyndns.org
herokuapp.com
)";

bool is_valid_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' || c == '.';
}

}  // namespace

const std::string& SuffixTable::builtin_text() {
    static const std::string text(kBuiltinSuffixes);
    return text;
}

SuffixTable SuffixTable::builtin() {
    std::istringstream in(builtin_text());
    SuffixTable table;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (line.find('.') != std::string::npos) {
            table.cctld_blocks.insert(line);
        } else {
            table.tlds.insert(line);
        }
    }
    return table;
}

SuffixTable SuffixTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("suffix table: cannot open '" + path + "'");
    SuffixTable table;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n' || line.back() == ' '))
            line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        for (char& c : line) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (line.front() == '.' || line.back() == '.')
            throw IoError("suffix table: leading/trailing dot at line " + std::to_string(lineno));
        if (line.find('.') != std::string::npos) {
            table.cctld_blocks.insert(line);
        } else {
            table.tlds.insert(line);
        }
    }
    return table;
}

SldOutcome normalize(const std::string& raw) {
    SldOutcome out;
    out.value.reserve(raw.size());
    for (char c : raw) {
        const char lc = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (!is_valid_char(lc)) {
            out.value.clear();
            out.reject = RejectReason::invalid_char;
            out.offending = c;
            return out;
        }
        out.value.push_back(lc);
    }
    return out;
}

SldOutcome extract_effective_sld(const std::string& domain, const SuffixTable& table) {
    SldOutcome out;
    // rule (iii): no dot, use as-is
    const size_t last_dot = domain.rfind('.');
    if (last_dot == std::string::npos) {
        out.value = domain;
        return out;
    }
    // rule (i): longest ccTLD block preceded by a dot
    size_t best_len = 0;
    for (const std::string& block : table.cctld_blocks) {
        if (domain.size() <= block.size() + 1) continue;
        if (domain[domain.size() - block.size() - 1] != '.') continue;
        if (domain.compare(domain.size() - block.size(), block.size(), block) != 0) continue;
        best_len = std::max(best_len, block.size());
    }
    if (best_len > 0) {
        out.value = domain.substr(0, domain.size() - best_len - 1);
        return out;
    }
    // rule (ii): strip after the final dot
    out.value = domain.substr(0, last_dot);
    if (out.value.empty()) {
        out.reject = RejectReason::empty_sld;
    }
    return out;
}

std::vector<DomainRecord> dedupe_merge(const std::vector<std::vector<DomainRecord>>& sources) {
    // key: sld -> per-label earliest record
    std::map<std::string, std::map<int, DomainRecord>> by_sld;
    for (const auto& source : sources) {
        for (const DomainRecord& rec : source) {
            const std::string& key = rec.text();
            auto& slot = by_sld[key];
            auto it = slot.find(static_cast<int>(rec.label));
            if (it == slot.end() || rec.year < it->second.year) {
                slot[static_cast<int>(rec.label)] = rec;
            }
        }
    }
    std::vector<DomainRecord> out;
    out.reserve(by_sld.size());
    for (auto& [sld, slot] : by_sld) {
        (void)sld;
        auto dga = slot.find(static_cast<int>(Label::dga));
        if (dga != slot.end()) {
            out.push_back(std::move(dga->second));  // decontamination: dga wins
        } else {
            out.push_back(std::move(slot.begin()->second));
        }
    }
    std::sort(out.begin(), out.end(), [](const DomainRecord& a, const DomainRecord& b) {
        if (a.year != b.year) return a.year < b.year;
        if (a.text() != b.text()) return a.text() < b.text();
        return static_cast<int>(a.label) < static_cast<int>(b.label);
    });
    return out;
}

std::vector<DomainRecord> preprocess_records(const std::vector<DomainRecord>& records,
                                             const SuffixTable& table, PreprocessStats* stats) {
    PreprocessStats local;
    local.input = records.size();
    std::vector<DomainRecord> cleaned;
    cleaned.reserve(records.size());
    for (const DomainRecord& rec : records) {
        SldOutcome norm = normalize(rec.raw);
        if (!norm.ok()) {
            ++local.rejected_invalid_char;
            continue;
        }
        SldOutcome sld = extract_effective_sld(norm.value, table);
        if (!sld.ok()) {
            ++local.rejected_empty_sld;
            continue;
        }
        DomainRecord out = rec;
        out.raw = norm.value;
        out.sld = std::move(sld.value);
        cleaned.push_back(std::move(out));
    }
    std::vector<DomainRecord> merged = dedupe_merge({cleaned});
    local.output = merged.size();
    if (stats) *stats = local;
    return merged;
}

}  // namespace dgadet
