#include "glean/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "glean/kernels.hpp"
#include "glean/rng.hpp"

namespace glean::cluster {

namespace {

// Nearest centroid, ties broken by lowest cluster index.
int nearest_centroid(const Matrix& centroids, const double* x, std::size_t d, double* dist_out) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < centroids.rows(); ++k) {
        const double dd = kernels::l2sq(x, centroids.row(k), d);
        if (dd < best_d) {
            best_d = dd;
            best = static_cast<int>(k);
        }
    }
    if (dist_out) *dist_out = best_d;
    return best;
}

Matrix kmeanspp_init(const Matrix& emb, int K, Rng& rng) {
    const std::size_t n = emb.rows();
    const std::size_t d = emb.cols();
    Matrix centroids(K, d);
    std::vector<bool> chosen(n, false);

    const std::size_t first = static_cast<std::size_t>(rng.next_below(n));
    std::copy(emb.row(first), emb.row(first) + d, centroids.row(0));
    chosen[first] = true;

    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = kernels::l2sq(emb.row(i), centroids.row(0), d);

    for (int k = 1; k < K; ++k) {
        double total = 0.0;
        for (double v : d2) total += v;
        std::size_t pick = n;
        if (total > 0.0) {
            const double r = rng.next_double() * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= r && d2[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
            if (pick == n) {
                // r landed past the last positive mass; take the last positive entry
                for (std::size_t i = n; i-- > 0;) {
                    if (d2[i] > 0.0) {
                        pick = i;
                        break;
                    }
                }
            }
        }
        if (pick == n) {
            // all remaining mass zero (duplicate points); take lowest unchosen index
            for (std::size_t i = 0; i < n; ++i) {
                if (!chosen[i]) {
                    pick = i;
                    break;
                }
            }
        }
        chosen[pick] = true;
        std::copy(emb.row(pick), emb.row(pick) + d, centroids.row(k));
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], kernels::l2sq(emb.row(i), centroids.row(k), d));
        }
    }
    return centroids;
}

// Assigns every row; reseeds empty clusters from the globally farthest point.
// Returns inertia under the (possibly adjusted) centroids.
double assign_with_empty_fix(const Matrix& emb, Matrix& centroids, std::vector<int>& assignment) {
    const std::size_t n = emb.rows();
    const std::size_t d = emb.cols();
    const std::size_t K = centroids.rows();
    std::vector<double> dist(n);

    for (std::size_t i = 0; i < n; ++i) {
        assignment[i] = nearest_centroid(centroids, emb.row(i), d, &dist[i]);
    }

    for (std::size_t guard = 0; guard <= K; ++guard) {
        std::vector<std::size_t> counts(K, 0);
        for (int a : assignment) ++counts[a];
        std::size_t empty = K;
        for (std::size_t k = 0; k < K; ++k) {
            if (counts[k] == 0) {
                empty = k;
                break;
            }
        }
        if (empty == K) break;
        std::size_t far = 0;
        for (std::size_t i = 1; i < n; ++i) {
            if (dist[i] > dist[far]) far = i;
        }
        std::copy(emb.row(far), emb.row(far) + d, centroids.row(empty));
        for (std::size_t i = 0; i < n; ++i) {
            assignment[i] = nearest_centroid(centroids, emb.row(i), d, &dist[i]);
        }
    }

    double inertia = 0.0;
    for (double v : dist) inertia += v;
    return inertia;
}

}  // namespace

KmeansResult kmeans(const Matrix& embeddings, int K, std::uint64_t seed, int max_iter, double tol) {
    const std::size_t n = embeddings.rows();
    const std::size_t d = embeddings.cols();
    if (K < 1) throw std::invalid_argument("K must be at least 1");
    if (static_cast<std::size_t>(K) > n) throw std::invalid_argument("K exceeds the number of points");
    if (max_iter < 1) throw std::invalid_argument("max_iter must be at least 1");
    for (double v : embeddings.data()) {
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite embedding value");
    }

    Rng rng(derive_seed(seed, "kmeans++"));
    KmeansResult res;
    res.centroids = kmeanspp_init(embeddings, K, rng);
    res.assignment.assign(n, 0);

    for (int iter = 1; iter <= max_iter; ++iter) {
        res.iterations = iter;
        const double inertia = assign_with_empty_fix(embeddings, res.centroids, res.assignment);
        res.inertia_history.push_back(inertia);

        Matrix means(K, d);
        std::vector<std::size_t> counts(K, 0);
        for (std::size_t i = 0; i < n; ++i) {
            kernels::axpy(1.0, embeddings.row(i), means.row(res.assignment[i]), d);
            ++counts[res.assignment[i]];
        }
        double shift = 0.0;
        for (int k = 0; k < K; ++k) {
            if (counts[k] == 0) continue;  // unreachable after empty fix
            kernels::scale(1.0 / static_cast<double>(counts[k]), means.row(k), d);
            shift = std::max(shift, std::sqrt(kernels::l2sq(means.row(k), res.centroids.row(k), d)));
        }
        if (shift < tol || iter == max_iter) break;  // assignment stays consistent with centroids
        res.centroids = std::move(means);
    }
    return res;
}

Matrix soft_assign(const Matrix& embeddings, const Matrix& centroids, double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
    if (centroids.rows() < 2) throw std::invalid_argument("soft assignment needs K >= 2");
    if (embeddings.cols() != centroids.cols()) {
        throw std::invalid_argument("embedding/centroid dimension mismatch");
    }
    const std::size_t n = embeddings.rows();
    const std::size_t K = centroids.rows();
    const std::size_t d = embeddings.cols();
    const double expo = -(alpha + 1.0) / 2.0;

    Matrix p(n, K);
    std::vector<double> base(K);
    for (std::size_t i = 0; i < n; ++i) {
        double min_base = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < K; ++k) {
            base[k] = 1.0 + kernels::l2sq(embeddings.row(i), centroids.row(k), d) / alpha;
            min_base = std::min(min_base, base[k]);
        }
        // Factor out the largest kernel value so the row maximum is exactly 1.
        double sum = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const double w = std::pow(base[k] / min_base, expo);
            p.at(i, k) = w;
            sum += w;
        }
        kernels::scale(1.0 / sum, p.row(i), K);
    }
    return p;
}

double entropy(std::span<const double> p_row) {
    double h = 0.0;
    for (double v : p_row) {
        if (v > 0.0) h -= v * std::log(v);
    }
    return h;
}

QuerySet mine_query_set(const std::map<std::string, double>& entropies, int v,
                        const std::set<std::string>& eligible) {
    if (v < 0) throw std::invalid_argument("query budget must be non-negative");
    QuerySet q;
    q.budget = v;
    q.entries.reserve(eligible.size());
    for (const auto& id : eligible) {
        auto it = entropies.find(id);
        if (it == entropies.end()) {
            throw std::runtime_error("eligible id without an entropy value: " + id);
        }
        q.entries.emplace_back(id, it->second);
    }
    std::sort(q.entries.begin(), q.entries.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (q.entries.size() > static_cast<std::size_t>(v)) q.entries.resize(v);
    return q;
}

ClusterModel build_cluster_model(const data::Dataset& dataset, const Matrix& embeddings, int K,
                                 double alpha, std::uint64_t seed, int max_iter, double tol) {
    if (embeddings.rows() != dataset.size()) {
        throw std::invalid_argument("embedding row count does not match dataset");
    }
    ClusterModel model;
    model.alpha = alpha;
    KmeansResult km = kmeans(embeddings, K, seed, max_iter, tol);
    model.centroids = std::move(km.centroids);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        model.hard_assignment[dataset.instances()[i].id] = km.assignment[i];
    }
    model.soft = soft_assign(embeddings, model.centroids, alpha);
    model.entropy.resize(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        model.entropy[i] = entropy(model.soft.row_span(i));
    }
    return model;
}

std::map<int, std::vector<std::string>> members_by_cluster(const ClusterModel& model) {
    std::map<int, std::vector<std::string>> members;
    for (std::size_t k = 0; k < model.k(); ++k) members[static_cast<int>(k)];
    for (const auto& [id, k] : model.hard_assignment) members[k].push_back(id);
    return members;  // ids ascend within each cluster (map iteration order)
}

std::map<int, std::vector<std::string>> select_representatives(const data::Dataset& dataset,
                                                               const Matrix& embeddings,
                                                               const ClusterModel& model,
                                                               RepresentativeStrategy strategy,
                                                               int n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("representative count must be at least 1");
    const std::size_t d = embeddings.cols();
    auto members = members_by_cluster(model);
    std::map<int, std::vector<std::string>> out;

    for (auto& [cid, ids] : members) {
        if (ids.empty()) {
            throw std::runtime_error("cluster " + std::to_string(cid) + " has no members");
        }
        std::vector<std::string> reps;
        if (strategy == RepresentativeStrategy::random) {
            reps = ids;
            Rng rng(derive_seed(seed, "reps.random", static_cast<std::uint64_t>(cid)));
            rng.shuffle(reps);
            if (reps.size() > static_cast<std::size_t>(n)) reps.resize(n);
        } else if (strategy == RepresentativeStrategy::nearest_to_center) {
            std::vector<std::pair<double, std::string>> ranked;
            ranked.reserve(ids.size());
            for (const auto& id : ids) {
                const std::size_t row = dataset.index_of(id);
                ranked.emplace_back(kernels::l2sq(embeddings.row(row), model.centroids.row(cid), d),
                                    id);
            }
            std::sort(ranked.begin(), ranked.end());
            const std::size_t take = std::min<std::size_t>(n, ranked.size());
            for (std::size_t i = 0; i < take; ++i) reps.push_back(ranked[i].second);
        } else {  // sub_kmeans
            if (ids.size() <= static_cast<std::size_t>(n)) {
                reps = ids;
            } else {
                Matrix sub(ids.size(), d);
                for (std::size_t i = 0; i < ids.size(); ++i) {
                    const double* src = embeddings.row(dataset.index_of(ids[i]));
                    std::copy(src, src + d, sub.row(i));
                }
                KmeansResult km = kmeans(sub, n,
                                         derive_seed(seed, "reps.subkmeans",
                                                     static_cast<std::uint64_t>(cid)));
                for (std::size_t sk = 0; sk < km.centroids.rows(); ++sk) {
                    std::size_t best = 0;
                    double best_d = std::numeric_limits<double>::infinity();
                    for (std::size_t i = 0; i < ids.size(); ++i) {
                        const double dd = kernels::l2sq(sub.row(i), km.centroids.row(sk), d);
                        if (dd < best_d || (dd == best_d && ids[i] < ids[best])) {
                            best_d = dd;
                            best = i;
                        }
                    }
                    if (std::find(reps.begin(), reps.end(), ids[best]) == reps.end()) {
                        reps.push_back(ids[best]);
                    }
                }
            }
        }
        out[cid] = std::move(reps);
    }
    return out;
}

RepresentativeStrategy strategy_from_string(const std::string& name) {
    if (name == "random") return RepresentativeStrategy::random;
    if (name == "nearest_to_center") return RepresentativeStrategy::nearest_to_center;
    if (name == "sub_kmeans") return RepresentativeStrategy::sub_kmeans;
    throw std::invalid_argument("unknown representative strategy: " + name);
}

std::string strategy_to_string(RepresentativeStrategy s) {
    switch (s) {
        case RepresentativeStrategy::random: return "random";
        case RepresentativeStrategy::nearest_to_center: return "nearest_to_center";
        case RepresentativeStrategy::sub_kmeans: return "sub_kmeans";
    }
    return "unknown";
}

}  // namespace glean::cluster
