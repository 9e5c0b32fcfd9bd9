#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "glean/data.hpp"
#include "glean/matrix.hpp"

namespace glean::cluster {

struct KmeansResult {
    Matrix centroids;                 // K x D
    std::vector<int> assignment;     // row index -> cluster
    std::vector<double> inertia_history;  // inertia after each assignment step
    int iterations = 0;
};

struct ClusterModel {
    Matrix centroids;                       // K x D
    std::map<std::string, int> hard_assignment;  // id -> cluster
    Matrix soft;                            // N x K, row-stochastic, rows in dataset order
    std::vector<double> entropy;            // nats, rows in dataset order
    double alpha = 1.0;

    std::size_t k() const { return centroids.rows(); }
};

struct QuerySet {
    // (id, entropy), descending entropy, ties by ascending id
    std::vector<std::pair<std::string, double>> entries;
    int budget = 0;
};

enum class RepresentativeStrategy { random, nearest_to_center, sub_kmeans };

KmeansResult kmeans(const Matrix& embeddings, int K, std::uint64_t seed, int max_iter = 100,
                    double tol = 1e-6);

// Student's-t soft assignment (one row per embedding, rows sum to 1).
Matrix soft_assign(const Matrix& embeddings, const Matrix& centroids, double alpha);

// Shannon entropy in nats, with 0*ln(0) = 0.
double entropy(std::span<const double> p_row);

QuerySet mine_query_set(const std::map<std::string, double>& entropies, int v,
                        const std::set<std::string>& eligible);

// Builds the full model for a dataset snapshot: k-means, soft assignment,
// per-instance entropy.
ClusterModel build_cluster_model(const data::Dataset& dataset, const Matrix& embeddings, int K,
                                 double alpha, std::uint64_t seed, int max_iter = 100,
                                 double tol = 1e-6);

std::map<int, std::vector<std::string>> members_by_cluster(const ClusterModel& model);

std::map<int, std::vector<std::string>> select_representatives(const data::Dataset& dataset,
                                                               const Matrix& embeddings,
                                                               const ClusterModel& model,
                                                               RepresentativeStrategy strategy,
                                                               int n, std::uint64_t seed);

RepresentativeStrategy strategy_from_string(const std::string& name);
std::string strategy_to_string(RepresentativeStrategy s);

}  // namespace glean::cluster
