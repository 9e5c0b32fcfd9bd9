#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glean/cluster.hpp"
#include "glean/data.hpp"
#include "glean/embed.hpp"
#include "glean/feedback.hpp"
#include "glean/matrix.hpp"

namespace glean::learn {

// Two affine layers with a rectifier in between; the output is L2-normalized
// (norm floored at 1e-12 so a zero input stays defined).
class ProjectionHead {
public:
    ProjectionHead() = default;
    ProjectionHead(int in_dim, int hidden_dim, int out_dim);  // zero-initialized (gradient buffer)
    ProjectionHead(int in_dim, int hidden_dim, int out_dim, std::uint64_t seed);

    int in_dim() const { return in_dim_; }
    int hidden_dim() const { return hidden_dim_; }
    int out_dim() const { return out_dim_; }
    std::size_t param_count() const;

    struct Cache {
        std::vector<double> input;
        std::vector<double> pre_act;  // W1 h + b1
        std::vector<double> hidden;   // relu(pre_act)
        std::vector<double> raw_out;  // W2 hidden + b2
        double norm = 0.0;            // max(||raw_out||, 1e-12)
    };

    std::vector<double> forward(std::span<const double> h, Cache* cache = nullptr) const;

    // Accumulates parameter gradients into `grad` (same shape, zero-initialized
    // by the caller) and returns dL/dh.
    std::vector<double> backward(const Cache& cache, std::span<const double> dz,
                                 ProjectionHead& grad) const;

    void add_scaled(const ProjectionHead& other, double factor);
    void set_zero();

    Matrix w1, w2;              // hidden x in, out x hidden
    std::vector<double> b1, b2;

private:
    int in_dim_ = 0, hidden_dim_ = 0, out_dim_ = 0;
};

struct Classifier {
    Classifier() = default;
    Classifier(int in_dim, int n_classes);                      // zero-initialized
    Classifier(int in_dim, int n_classes, std::uint64_t seed);  // fan-in uniform init

    Matrix w;                // n_classes x in
    std::vector<double> b;   // n_classes
    int in_dim = 0;
    int n_classes = 0;

    void add_scaled(const Classifier& other, double factor);
};

struct LearnConfig {
    double tau = 0.07;       // contrastive temperature
    double lambda = 0.05;    // alignment weight
    double alpha = 1.0;      // Student's-t degrees of freedom
    double lr_head = 1e-3;   // head + classifier learning rate
    double lr_table = 1e-2;  // embedding-table learning rate
    int batch = 80;
    int epochs = 25;
    int refresh_every = 5;
    int knn_k = 50;
    int head_hidden = 768;
    int head_out = 128;
    bool use_ce = true;
    bool use_ncl = true;
    bool use_sis = true;        // instance-instance feedback shapes NCL positives
    bool use_alignment = true;  // cluster-instance feedback + alignment loss
    int kmeans_max_iter = 100;
    double kmeans_tol = 1e-6;
};

struct LossReport {
    double ce = 0.0;
    double ncl = 0.0;
    double align = 0.0;
    double total = 0.0;  // ce + ncl + lambda * align, composed exactly
};

struct TrainState {
    ProjectionHead head;
    Classifier classifier;
    Matrix embedding_table;  // N x D, rows in dataset order
    LearnConfig hyper;
    std::vector<LossReport> loss_history;
    std::vector<std::string> known_categories;  // classifier class order
};

// ---------------------------------------------------------------------------
// Losses (all analytic-gradient; checked against finite differences)

struct NclResult {
    double loss = 0.0;
    Matrix grad;  // dL/dz per batch row
};

// InfoNCE over the batch: positives designated per anchor, denominator over
// all in-batch rows except the anchor itself (positive included).
NclResult ncl_loss(const Matrix& batch_z, const std::map<std::size_t, std::size_t>& positive_of,
                   double tau);

struct AlignResult {
    double loss = 0.0;
    std::vector<double> grad_z;
    bool degenerate = false;  // single-candidate case (loss fixed at 0)
};

// Softmax over candidate cards (positive included), -log of the positive's
// probability.
AlignResult align_loss(std::span<const double> z_anchor,
                       const std::vector<std::vector<double>>& cards, std::size_t positive_index,
                       double tau);

struct CeResult {
    double loss = 0.0;
    Matrix grad_h;   // per input row
    Classifier grad; // dL/dW, dL/db
};

// Softmax cross-entropy over known categories, averaged over rows.
CeResult ce_loss(const Matrix& h, const std::vector<int>& labels, const Classifier& clf);

// ---------------------------------------------------------------------------
// Positive assignment and the training pipeline

// Every instance gets a positive: accepted similar-instance feedback wins for
// its anchor; everyone else (and rejected anchors) draws a seeded uniform
// neighbor from the table.
std::map<std::string, std::string> assign_positives(
    const std::vector<std::string>& query_ids,
    const std::vector<feedback::FeedbackRecord>& sis_records,
    const data::NeighborTable& neighbors, std::uint64_t seed);

struct PipelineConfig {
    LearnConfig learn;
    int K_total = 0;
    int query_budget = 500;      // v
    int sis_options = 5;         // M
    int n_representatives = 10;
    double candidate_ratio = 0.5;
    cluster::RepresentativeStrategy strategy = cluster::RepresentativeStrategy::nearest_to_center;
    double confidence_threshold = 0.6;
    bool demos = true;
    int demo_count = 3;
    std::uint64_t seed = 0;
};

struct RoundLog {
    int epoch = 0;
    std::vector<std::string> query_ids;
    std::size_t accepted_sis = 0;
    std::size_t accepted_selection = 0;
};

struct RunResult {
    TrainState state;
    std::map<std::string, int> final_assignment;  // id -> cluster
    std::vector<feedback::FeedbackRecord> feedback_records;
    std::vector<std::string> feedback_log;        // one JSON line per query, in issue order
    std::map<int, feedback::CategoryCard> last_cards;
    std::vector<RoundLog> rounds;
};

// The full training loop: cluster, mine, query, filter, assign positives,
// minibatch SGD on the composed loss, final K-Means on the refined table.
// `provider` may be null (no-feedback baseline); `encoder` may be null
// (cards fall back to projected cluster centroids).
RunResult run_pipeline(const data::Dataset& dataset, const data::GcdSplit& split,
                       const PipelineConfig& config, feedback::Provider* provider,
                       embed::Embedder* encoder = nullptr);

// Checkpoint round-trip (versioned JSON container).
std::string train_state_to_json(const TrainState& state);
TrainState train_state_from_json(const std::string& text);

}  // namespace glean::learn
