#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "glean/embed.hpp"
#include "glean/feedback.hpp"
#include "glean/matrix.hpp"

namespace glean::eval {

struct MetricsReport {
    double acc = 0.0;
    double ari = 0.0;
    double nmi = 0.0;
};

struct CharacterizationReport {
    double coverage = 0.0;
    double uniformity = 0.0;
    double sematching = 0.0;
    double informative = 0.0;
};

// Maximum-weight one-to-one assignment on a rectangular weight matrix.
// Returns, per row, the matched column or -1. O(n^3).
std::vector<int> hungarian_max(const Matrix& weights);

// Hungarian-matched clustering accuracy. Unmatched clusters score 0.
double clustering_accuracy(std::span<const int> pred, std::span<const int> truth);
double adjusted_rand_index(std::span<const int> pred, std::span<const int> truth);
double normalized_mutual_information(std::span<const int> pred, std::span<const int> truth);

// Map-based variants; both maps must cover the same id set.
MetricsReport compute_metrics(const std::map<std::string, int>& pred,
                              const std::map<std::string, std::string>& truth);

CharacterizationReport characterization_scores(const std::vector<feedback::CategoryCard>& cards,
                                               const std::set<std::string>& truth_names,
                                               embed::Embedder& name_embedder, double theta = 0.5);

struct FeedbackTruth {
    std::map<std::string, std::string> instance_labels;  // id -> ground-truth label
    std::map<std::string, std::string> cluster_labels;   // cluster id string -> majority label
};

struct QualityReport {
    double accuracy_all = 0.0;       // over records whose option set contains a correct answer
    double accuracy_accepted = 0.0;  // same, restricted to accepted records
    std::size_t evaluated_all = 0;
    std::size_t evaluated_accepted = 0;
    std::size_t no_correct_option = 0;  // excluded from both accuracies
    std::size_t unparsed = 0;
};

QualityReport feedback_quality(std::span<const feedback::FeedbackRecord> records,
                               const FeedbackTruth& truth);

}  // namespace glean::eval
