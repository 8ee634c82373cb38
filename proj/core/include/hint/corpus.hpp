#pragma once

#include <span>
#include <string>
#include <vector>

namespace hint {

class Rng;

// Unlabeled-text pretraining example: a sequence split into three contiguous
// chunks. The model sees `a` as the instruction stand-in, `c` as the input,
// and learns to produce `b` (the span between them).
struct ChunkTriple {
    std::vector<int> a;
    std::vector<int> b;
    std::vector<int> c;
};

// Two cut points drawn uniformly without replacement from the interior, so
// every chunk is non-empty. Throws LengthError for sequences shorter than 3.
ChunkTriple chunk_split(std::span<const int> tokens, Rng& rng);

std::vector<int> load_corpus_file(const std::string& path); // bytes -> token ids

// Fixed-length windows over the corpus, in order, wrapping at the end.
class CorpusStream {
public:
    CorpusStream(std::vector<int> tokens, int seq_len);
    std::vector<int> next_sequence();
    std::size_t corpus_size() const { return tokens_.size(); }

private:
    std::vector<int> tokens_;
    int seq_len_;
    std::size_t cursor_ = 0;
};

} // namespace hint
