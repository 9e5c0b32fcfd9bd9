#include "glean/embed.hpp"

#include <cctype>
#include <cmath>
#include <stdexcept>

#include "glean/kernels.hpp"
#include "glean/rng.hpp"

namespace glean::embed {

std::vector<std::vector<double>> TrigramEmbedder::embed(const std::vector<std::string>& texts) {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        // lowercase, collapse runs of non-alphanumerics to single spaces
        std::string norm;
        norm.reserve(text.size());
        bool last_space = true;
        for (unsigned char c : text) {
            if (std::isalnum(c)) {
                norm.push_back(static_cast<char>(std::tolower(c)));
                last_space = false;
            } else if (!last_space) {
                norm.push_back(' ');
                last_space = true;
            }
        }
        while (!norm.empty() && norm.back() == ' ') norm.pop_back();

        std::vector<double> v(dim_, 0.0);
        const std::string padded = "^" + norm + "$";
        const std::size_t grams = padded.size() >= 3 ? padded.size() - 2 : 1;
        for (std::size_t i = 0; i < grams; ++i) {
            const std::string_view g(padded.data() + i, std::min<std::size_t>(3, padded.size() - i));
            v[fnv1a64(g) % dim_] += 1.0;
        }
        l2_normalize(v);
        out.push_back(std::move(v));
    }
    return out;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("cosine: dimension mismatch");
    }
    const double num = kernels::dot(a.data(), b.data(), a.size());
    const double na = std::sqrt(kernels::dot(a.data(), a.data(), a.size()));
    const double nb = std::sqrt(kernels::dot(b.data(), b.data(), b.size()));
    if (na <= 0.0 || nb <= 0.0) return 0.0;
    return num / (na * nb);
}

void l2_normalize(std::vector<double>& x) {
    const double n = std::sqrt(kernels::dot(x.data(), x.data(), x.size()));
    kernels::scale(1.0 / std::max(n, 1e-12), x.data(), x.size());
}

}  // namespace glean::embed
