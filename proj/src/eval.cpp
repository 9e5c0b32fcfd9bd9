#include "glean/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace glean::eval {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Contingency table between two integer labelings plus marginals.
struct Contingency {
    std::size_t n = 0;
    std::size_t rows = 0, cols = 0;
    std::map<std::pair<int, int>, std::size_t> cells;
    std::map<int, std::size_t> row_sums, col_sums;
};

Contingency contingency(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) throw std::invalid_argument("partition size mismatch");
    if (a.empty()) throw std::invalid_argument("empty partitions");
    Contingency c;
    c.n = a.size();
    for (std::size_t i = 0; i < a.size(); ++i) {
        ++c.cells[{a[i], b[i]}];
        ++c.row_sums[a[i]];
        ++c.col_sums[b[i]];
    }
    c.rows = c.row_sums.size();
    c.cols = c.col_sums.size();
    return c;
}

double pairs(double m) { return m * (m - 1.0) / 2.0; }

}  // namespace

// Min-cost square assignment with potentials, run on -weights and padded so
// rectangular inputs are allowed.
std::vector<int> hungarian_max(const Matrix& weights) {
    const std::size_t rows = weights.rows();
    const std::size_t cols = weights.cols();
    if (rows == 0 || cols == 0) return std::vector<int>(rows, -1);
    const std::size_t n = std::max(rows, cols);

    // 1-indexed cost matrix; padding cells cost 0 (weight 0)
    auto cost = [&](std::size_t i, std::size_t j) -> double {
        if (i <= rows && j <= cols) return -weights.at(i - 1, j - 1);
        return 0.0;
    };

    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, kInf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = p[j0];
            double delta = kInf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0, j) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }

    std::vector<int> match(rows, -1);
    for (std::size_t j = 1; j <= n; ++j) {
        if (p[j] >= 1 && p[j] <= rows && j <= cols) {
            match[p[j] - 1] = static_cast<int>(j - 1);
        }
    }
    return match;
}

double clustering_accuracy(std::span<const int> pred, std::span<const int> truth) {
    const Contingency c = contingency(pred, truth);

    std::map<int, std::size_t> row_index, col_index;
    for (const auto& [k, cnt] : c.row_sums) row_index.emplace(k, row_index.size());
    for (const auto& [k, cnt] : c.col_sums) col_index.emplace(k, col_index.size());

    Matrix w(c.rows, c.cols);
    for (const auto& [cell, cnt] : c.cells) {
        w.at(row_index[cell.first], col_index[cell.second]) = static_cast<double>(cnt);
    }
    const std::vector<int> match = hungarian_max(w);
    double matched = 0.0;
    for (std::size_t r = 0; r < c.rows; ++r) {
        if (match[r] >= 0) matched += w.at(r, match[r]);
    }
    return matched / static_cast<double>(c.n);
}

double adjusted_rand_index(std::span<const int> pred, std::span<const int> truth) {
    const Contingency c = contingency(pred, truth);

    double sum_cells = 0.0;
    for (const auto& [cell, cnt] : c.cells) sum_cells += pairs(static_cast<double>(cnt));
    double sum_u = 0.0, sum_v = 0.0;
    for (const auto& [k, cnt] : c.row_sums) sum_u += pairs(static_cast<double>(cnt));
    for (const auto& [k, cnt] : c.col_sums) sum_v += pairs(static_cast<double>(cnt));
    const double total_pairs = pairs(static_cast<double>(c.n));

    const double expected = total_pairs > 0.0 ? sum_u * sum_v / total_pairs : 0.0;
    const double denom = 0.5 * (sum_u + sum_v) - expected;
    if (denom == 0.0) {
        // both partitions degenerate; 1 iff they are the same partition
        const bool identical = c.cells.size() == c.rows && c.cells.size() == c.cols;
        return identical ? 1.0 : 0.0;
    }
    return (sum_cells - expected) / denom;
}

double normalized_mutual_information(std::span<const int> pred, std::span<const int> truth) {
    const Contingency c = contingency(pred, truth);
    const double n = static_cast<double>(c.n);

    double h_p = 0.0, h_t = 0.0, mi = 0.0;
    for (const auto& [k, cnt] : c.row_sums) {
        const double q = static_cast<double>(cnt) / n;
        h_p -= q * std::log(q);
    }
    for (const auto& [k, cnt] : c.col_sums) {
        const double q = static_cast<double>(cnt) / n;
        h_t -= q * std::log(q);
    }
    for (const auto& [cell, cnt] : c.cells) {
        const double joint = static_cast<double>(cnt) / n;
        const double pu = static_cast<double>(c.row_sums.at(cell.first)) / n;
        const double pv = static_cast<double>(c.col_sums.at(cell.second)) / n;
        mi += joint * std::log(joint / (pu * pv));
    }
    if (h_p + h_t == 0.0) return 1.0;  // both partitions degenerate and equal
    const double nmi = 2.0 * mi / (h_p + h_t);
    return std::clamp(nmi, 0.0, 1.0);
}

MetricsReport compute_metrics(const std::map<std::string, int>& pred,
                              const std::map<std::string, std::string>& truth) {
    if (pred.size() != truth.size()) {
        throw std::invalid_argument("prediction and truth cover different id sets (" +
                                    std::to_string(pred.size()) + " vs " +
                                    std::to_string(truth.size()) + " ids)");
    }
    std::vector<int> p, t;
    p.reserve(pred.size());
    t.reserve(pred.size());
    std::map<std::string, int> label_index;
    for (const auto& [id, cluster] : pred) {
        auto it = truth.find(id);
        if (it == truth.end()) throw std::invalid_argument("id missing from truth: " + id);
        p.push_back(cluster);
        t.push_back(label_index.emplace(it->second, static_cast<int>(label_index.size()))
                        .first->second);
    }
    MetricsReport r;
    r.acc = clustering_accuracy(p, t);
    r.ari = adjusted_rand_index(p, t);
    r.nmi = normalized_mutual_information(p, t);
    return r;
}

CharacterizationReport characterization_scores(const std::vector<feedback::CategoryCard>& cards,
                                               const std::set<std::string>& truth_names,
                                               embed::Embedder& name_embedder, double theta) {
    if (cards.empty()) throw std::invalid_argument("no category cards to score");
    if (truth_names.empty()) throw std::invalid_argument("no ground-truth category names");

    const std::vector<std::string> names(truth_names.begin(), truth_names.end());
    std::vector<std::string> texts;
    texts.reserve(cards.size() + names.size());
    for (const auto& card : cards) texts.push_back(card.text());
    for (const auto& g : names) texts.push_back(g);
    const auto vecs = name_embedder.embed(texts);

    const std::size_t C = cards.size();
    const std::size_t K = names.size();
    // s(c, g) = cosine clamped into [0, 1]
    Matrix s(C, K);
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t g = 0; g < K; ++g) {
            s.at(c, g) = std::max(0.0, embed::cosine(vecs[c], vecs[C + g]));
        }
    }

    // nearest truth category per card; ties to the lexicographically first name
    std::vector<std::size_t> nearest(C);
    for (std::size_t c = 0; c < C; ++c) {
        std::size_t best = 0;
        for (std::size_t g = 1; g < K; ++g) {
            if (s.at(c, g) > s.at(c, best)) best = g;
        }
        nearest[c] = best;
    }

    CharacterizationReport rep;

    std::set<std::size_t> covered;
    for (std::size_t c = 0; c < C; ++c) {
        if (s.at(c, nearest[c]) >= theta) covered.insert(nearest[c]);
    }
    rep.coverage = static_cast<double>(covered.size()) / static_cast<double>(K);

    std::map<std::size_t, std::size_t> counts;
    for (std::size_t g : nearest) ++counts[g];
    double h = 0.0;
    for (const auto& [g, cnt] : counts) {
        const double q = static_cast<double>(cnt) / static_cast<double>(C);
        h -= q * std::log(q);
    }
    rep.uniformity = K >= 2 ? h / std::log(static_cast<double>(K)) : 1.0;
    rep.uniformity = std::clamp(rep.uniformity, 0.0, 1.0);

    const std::vector<int> match = hungarian_max(s);
    double matched_sum = 0.0;
    std::size_t matched_count = 0;
    for (std::size_t c = 0; c < C; ++c) {
        if (match[c] >= 0) {
            matched_sum += s.at(c, match[c]);
            ++matched_count;
        }
    }
    rep.sematching = matched_count > 0 ? matched_sum / static_cast<double>(matched_count) : 0.0;
    rep.informative = rep.sematching * rep.uniformity;
    return rep;
}

QualityReport feedback_quality(std::span<const feedback::FeedbackRecord> records,
                               const FeedbackTruth& truth) {
    QualityReport q;
    std::size_t correct_all = 0, correct_accepted = 0;
    for (const auto& rec : records) {
        if (rec.kind == feedback::PromptKind::characterization) continue;
        if (!rec.anchor_id) continue;
        auto anchor_it = truth.instance_labels.find(*rec.anchor_id);
        if (anchor_it == truth.instance_labels.end()) {
            throw std::runtime_error("no ground truth for anchor " + *rec.anchor_id);
        }
        const std::string& want = anchor_it->second;

        // determine the set of correct options
        std::vector<bool> correct(rec.option_ids.size(), false);
        bool any_correct = false;
        for (std::size_t i = 0; i < rec.option_ids.size(); ++i) {
            const auto& opt = rec.option_ids[i];
            std::string got;
            if (rec.kind == feedback::PromptKind::similar_instance) {
                auto it = truth.instance_labels.find(opt);
                if (it == truth.instance_labels.end()) continue;
                got = it->second;
            } else {
                auto it = truth.cluster_labels.find(opt);
                if (it == truth.cluster_labels.end()) continue;
                got = it->second;
            }
            if (got == want) {
                correct[i] = true;
                any_correct = true;
            }
        }
        if (!any_correct) {
            ++q.no_correct_option;
            continue;
        }
        if (!rec.parsed_choice) ++q.unparsed;

        const bool is_correct = rec.parsed_choice && correct[*rec.parsed_choice];
        ++q.evaluated_all;
        if (is_correct) ++correct_all;
        if (rec.accepted) {
            ++q.evaluated_accepted;
            if (is_correct) ++correct_accepted;
        }
    }
    if (q.evaluated_all > 0) {
        q.accuracy_all = static_cast<double>(correct_all) / static_cast<double>(q.evaluated_all);
    }
    if (q.evaluated_accepted > 0) {
        q.accuracy_accepted =
            static_cast<double>(correct_accepted) / static_cast<double>(q.evaluated_accepted);
    }
    return q;
}

}  // namespace glean::eval
