#include "hint/tokenizer.hpp"

#include "hint/errors.hpp"

namespace hint {

std::vector<int> ByteTokenizer::encode(std::string_view text) const {
    std::vector<int> ids;
    ids.reserve(text.size());
    for (unsigned char c : text) ids.push_back(static_cast<int>(c));
    return ids;
}

std::string ByteTokenizer::decode(const std::vector<int>& ids) const {
    std::string out;
    out.reserve(ids.size());
    for (int id : ids) {
        if (id < 0 || id >= vocab_size) {
            throw DataError("decode: token id " + std::to_string(id) + " out of range");
        }
        if (id < 256) out.push_back(static_cast<char>(static_cast<unsigned char>(id)));
    }
    return out;
}

} // namespace hint
