#pragma once

#include <Eigen/Core>
#include <sstream>
#include <string>
#include <vector>

#include "splatedit/errors.hpp"
#include "splatedit/rng.hpp"

namespace splatedit {

/// Text prompt after tokenization and embedding; stand-in for a pretrained
/// text encoder. Embeddings depend only on the token string and the seed,
/// never on position, so duplicated words share a row.
struct PromptEmbedding {
    std::vector<std::string> tokens;
    Eigen::MatrixXd embeddings;  // N_tok x text_dim, unit rows

    int token_count() const { return static_cast<int>(tokens.size()); }
    int dim() const { return static_cast<int>(embeddings.cols()); }

    /// Index of the first token equal to `word`, or -1.
    int find_token(const std::string& word) const {
        for (int i = 0; i < token_count(); ++i)
            if (tokens[i] == word) return i;
        return -1;
    }
};

/// Whitespace tokenization + seeded hash-to-vector embedding, unit-normalized.
inline PromptEmbedding embed_prompt(const std::string& text, int text_dim = 32, std::uint64_t seed = 0,
                                    int max_tokens = 16) {
    PromptEmbedding p;
    std::istringstream iss(text);
    std::string tok;
    while (iss >> tok) p.tokens.push_back(tok);
    if (p.tokens.empty()) throw ConfigError("empty prompt");
    if (p.token_count() > max_tokens)
        throw ConfigError("prompt has " + std::to_string(p.token_count()) + " tokens, max is " +
                          std::to_string(max_tokens));
    p.embeddings.resize(p.token_count(), text_dim);
    for (int i = 0; i < p.token_count(); ++i) {
        Rng rng(fnv1a64(p.tokens[i].data(), p.tokens[i].size()) ^ (seed * 0x9e3779b97f4a7c15ull + 1));
        for (int d = 0; d < text_dim; ++d) p.embeddings(i, d) = rng.normal();
        p.embeddings.row(i).normalize();
    }
    return p;
}

/// Fixed unconditional embedding (single zero token).
inline PromptEmbedding null_prompt(int text_dim = 32) {
    PromptEmbedding p;
    p.tokens = {"<null>"};
    p.embeddings = Eigen::MatrixXd::Zero(1, text_dim);
    return p;
}

}  // namespace splatedit
