#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace dgadet {

enum class Branch { char_branch, subword_branch };

// Special token ids are fixed so checkpoints stay portable.
inline constexpr int32_t kPad = 0;
inline constexpr int32_t kUnk = 1;
inline constexpr int32_t kCls = 2;
inline constexpr int32_t kSep = 3;
inline constexpr int32_t kMask = 4;
inline constexpr int kNumSpecials = 5;

// The 38 non-special symbols: a-z, 0-9, '-', '.'.
const std::string& base_alphabet();

// Token inventory shared by both branches. For the char branch this is exactly
// 43 entries. For the subword branch, merged tokens follow the base entries;
// a single base character doubles as its own '##' continuation piece.
class Vocabulary {
public:
    static Vocabulary char_vocab();

    int32_t id_of(const std::string& token) const;         // -1 if absent
    const std::string& token(int32_t id) const;
    int64_t size() const { return static_cast<int64_t>(tokens_.size()); }

    bool is_special(int32_t id) const { return id >= 0 && id < kNumSpecials; }

    // Longest-match lookup helpers used by the subword encoder.
    int32_t match_initial(const std::string& text, size_t pos, size_t* len) const;
    int32_t match_continuation(const std::string& text, size_t pos, size_t* len) const;

    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

    // construction (used by the trainer)
    int32_t add_token(const std::string& token);
    static Vocabulary with_base();

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int32_t> id_of_;
};

// Fixed-length id sequence for one branch.
struct TokenSequence {
    std::vector<int32_t> ids;        // length L
    std::vector<uint8_t> attn_mask;  // length L, 1 for real positions
    int n_real = 0;                  // count of non-pad positions
    Branch branch = Branch::char_branch;
};

inline constexpr int kDefaultCharLen = 77;
inline constexpr int kDefaultSubwordLen = 30;

TokenSequence encode_char(const std::string& sld, int max_len = kDefaultCharLen);

// Greedy longest-match-first WordPiece encoding. A word segment with no
// matching prefix becomes a single [UNK].
TokenSequence encode_subword(const std::string& sld, const Vocabulary& vocab,
                             int max_len = kDefaultSubwordLen);

// Inverse of encode_* for display and round-trip checks: strips specials and
// '##' continuation markers.
std::string decode(const TokenSequence& seq, const Vocabulary& vocab);

// WordPiece trainer. Starts from the 43 base entries; repeatedly merges the
// adjacent pair maximizing count(pair)/(count(left)*count(right)) until the
// vocabulary holds target_size tokens or no pair occurs twice. Ties break
// lexicographically on the merged token string.
Vocabulary train_wordpiece(const std::vector<std::string>& corpus, int target_size = 30522,
                           uint64_t seed = 0);

}  // namespace dgadet
