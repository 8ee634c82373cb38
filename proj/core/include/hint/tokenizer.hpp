#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace hint {

// Byte-level tokenizer: ids 0..255 are raw bytes, then four specials.
// decode() drops special ids, so round-trips are exact for any byte string.
class ByteTokenizer {
public:
    static constexpr int pad_id = 256;
    static constexpr int eos_id = 257;
    static constexpr int bos_id = 258;
    static constexpr int sep_id = 259;
    static constexpr int vocab_size = 260;

    std::vector<int> encode(std::string_view text) const;
    std::string decode(const std::vector<int>& ids) const;
    static bool is_special(int id) { return id >= 256 && id < vocab_size; }
};

} // namespace hint
