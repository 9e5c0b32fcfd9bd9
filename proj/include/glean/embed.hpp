#pragma once

#include <string>
#include <vector>

namespace glean::embed {

// Text-to-vector provider. Live runs use an HTTP embeddings endpoint; offline
// runs and tests use the deterministic trigram embedder below.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::size_t dim() const = 0;
    virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;

    std::vector<double> embed_one(const std::string& text) {
        return embed(std::vector<std::string>{text}).front();
    }
};

// Bag of character trigrams hashed into a fixed-width vector, L2-normalized.
// Deterministic across platforms; no network. Stands in for a real encoder
// wherever semantic similarity of short names is needed offline.
class TrigramEmbedder final : public Embedder {
public:
    explicit TrigramEmbedder(std::size_t dim = 256) : dim_(dim) {}
    std::size_t dim() const override { return dim_; }
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

private:
    std::size_t dim_;
};

double cosine(const std::vector<double>& a, const std::vector<double>& b);

// x / max(||x||, 1e-12)
void l2_normalize(std::vector<double>& x);

}  // namespace glean::embed
