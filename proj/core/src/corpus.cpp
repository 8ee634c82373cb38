#include "hint/corpus.hpp"

#include "hint/errors.hpp"
#include "hint/rng.hpp"

#include <fstream>

namespace hint {

ChunkTriple chunk_split(std::span<const int> tokens, Rng& rng) {
    int n = static_cast<int>(tokens.size());
    if (n < 3) {
        throw LengthError("chunk_split: need at least 3 tokens, got " + std::to_string(n));
    }
    // Two distinct interior cut points from {1, .., n-1}, uniform without
    // replacement: draw the first, then draw from the remaining n-2 values
    // and shift past the first.
    int c1 = rng.uniform_int(1, n - 1);
    int c2 = rng.uniform_int(1, n - 2);
    if (c2 >= c1) ++c2;
    if (c1 > c2) std::swap(c1, c2);
    ChunkTriple t;
    t.a.assign(tokens.begin(), tokens.begin() + c1);
    t.b.assign(tokens.begin() + c1, tokens.begin() + c2);
    t.c.assign(tokens.begin() + c2, tokens.end());
    return t;
}

std::vector<int> load_corpus_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open corpus file '" + path + "'");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.empty()) throw DataError("corpus file '" + path + "' is empty");
    std::vector<int> tokens;
    tokens.reserve(bytes.size());
    for (unsigned char c : bytes) tokens.push_back(static_cast<int>(c));
    return tokens;
}

CorpusStream::CorpusStream(std::vector<int> tokens, int seq_len)
    : tokens_(std::move(tokens)), seq_len_(seq_len) {
    if (seq_len_ < 3) throw ConfigError("CorpusStream: seq_len must be >= 3");
    if (static_cast<int>(tokens_.size()) < seq_len_) {
        throw DataError("CorpusStream: corpus has " + std::to_string(tokens_.size()) +
                        " tokens, shorter than one window of " + std::to_string(seq_len_));
    }
}

std::vector<int> CorpusStream::next_sequence() {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(seq_len_));
    for (int i = 0; i < seq_len_; ++i) {
        out.push_back(tokens_[cursor_]);
        cursor_ = (cursor_ + 1) % tokens_.size();
    }
    return out;
}

} // namespace hint
