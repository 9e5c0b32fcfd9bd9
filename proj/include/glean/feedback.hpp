#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "glean/cluster.hpp"
#include "glean/data.hpp"
#include "glean/embed.hpp"

namespace glean::feedback {

enum class PromptKind { similar_instance, characterization, category_selection };
enum class ProviderKind { live, oracle, replay };

std::string kind_to_string(PromptKind k);
PromptKind kind_from_string(const std::string& s);
std::string provider_to_string(ProviderKind k);

struct Prompt {
    PromptKind kind;
    std::string system;
    std::string user;
    std::optional<std::string> anchor_id;      // instance id, or cluster id for characterization
    std::vector<std::string> option_ids;       // instance ids or cluster ids; empty for characterization
    bool demos_included = false;
};

// Hex digest of (kind, system, user); key for the replay cache.
std::string prompt_digest(const Prompt& prompt);

struct ParsedResponse {
    std::optional<int> choice;  // 1-based, exactly as written in the response
    std::optional<std::string> name;
    std::optional<std::string> description;
    double confidence = 0.0;
};

ParsedResponse parse_response(const std::string& raw, PromptKind kind);

struct FeedbackRecord {
    PromptKind kind;
    std::optional<std::string> anchor_id;
    std::vector<std::string> option_ids;
    std::string raw_response;
    std::optional<std::size_t> parsed_choice;  // 0-based index into option_ids
    std::optional<std::string> name;           // characterization only
    std::optional<std::string> description;    // characterization only
    double confidence = 0.0;
    bool accepted = false;
    ProviderKind provider = ProviderKind::oracle;
    std::string digest;
};

struct CategoryCard {
    int cluster = -1;
    std::string name;
    std::string description;
    std::vector<double> d;  // L2-normalized; empty until the engine fills it

    std::string text() const {
        return description.empty() ? name : name + ": " + description;
    }
};

// ---------------------------------------------------------------------------
// Providers

class Provider {
public:
    virtual ~Provider() = default;
    virtual ProviderKind kind() const = 0;
    virtual std::string complete(const Prompt& prompt) = 0;
};

// Ground truth the oracle answers from. The engine refreshes cluster-level
// entries every query round.
struct OracleContext {
    const data::Dataset* dataset = nullptr;
    std::map<std::string, std::string> cluster_majority;  // cluster id string -> majority label
    std::vector<std::string> label_pool;                  // sorted distinct labels
};

struct OracleConfig {
    double epsilon = 0.0;  // corruption probability
    double c_hi = 0.9;     // confidence reported on truthful answers
    double c_lo = 0.3;     // confidence reported on corrupted answers
    std::uint64_t seed = 0;
};

// Deterministic ground-truth stand-in for the LLM. Answers:
//   similar_instance   -> first option sharing the anchor's label, else the
//                         option nearest in embedding space
//   category_selection -> first option whose cluster majority label equals the
//                         anchor's label, else the first option (candidate
//                         lists arrive sorted by descending cosine)
//   characterization   -> the cluster's majority label plus a templated
//                         description
// With probability epsilon the answer is replaced by a uniformly random wrong
// option (or wrong label). Noise draws are keyed on the prompt digest, so
// they are reproducible and independent of query order.
class OracleProvider final : public Provider {
public:
    OracleProvider(OracleConfig config, const OracleContext* context)
        : config_(config), context_(context) {}
    ProviderKind kind() const override { return ProviderKind::oracle; }
    std::string complete(const Prompt& prompt) override;

private:
    OracleConfig config_;
    const OracleContext* context_;
};

// Replays responses recorded by a previous run, keyed by prompt digest.
class ReplayProvider final : public Provider {
public:
    explicit ReplayProvider(const std::string& cache_path);
    ProviderKind kind() const override { return ProviderKind::replay; }
    std::string complete(const Prompt& prompt) override;
    std::size_t size() const { return cache_.size(); }

private:
    std::map<std::string, std::string> cache_;
};

struct LiveConfig {
    std::string base_url;  // e.g. http://localhost:8080/v1
    std::string model;
    std::string api_key;   // resolved from GLEAN_API_KEY by the caller
    int max_retries = 4;
    int initial_backoff_ms = 500;
    int max_backoff_ms = 8000;
    int timeout_s = 60;
};

// OpenAI-compatible chat-completions client, temperature 0, capped
// exponential backoff on transport errors and retryable statuses.
class LiveProvider final : public Provider {
public:
    explicit LiveProvider(LiveConfig config);
    ProviderKind kind() const override { return ProviderKind::live; }
    std::string complete(const Prompt& prompt) override;

private:
    LiveConfig config_;
};

// Embeddings-endpoint client (POST {base_url}/embeddings).
class HttpEmbedder final : public embed::Embedder {
public:
    HttpEmbedder(LiveConfig config, std::size_t expected_dim = 0);
    std::size_t dim() const override { return dim_; }
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

private:
    LiveConfig config_;
    std::size_t dim_;
};

// ---------------------------------------------------------------------------
// Query construction

struct SisCandidates {
    std::vector<std::string> candidates;  // ordered by cluster nearness
    std::vector<int> skipped_clusters;    // clusters with no member besides the anchor
};

SisCandidates build_sis_candidates(const std::string& anchor_id, const data::Dataset& dataset,
                                   const Matrix& embeddings, const cluster::ClusterModel& model,
                                   int M, std::uint64_t seed);

// Worked example injected into similar-instance / category-selection prompts.
struct DemoExample {
    std::string anchor_text;
    std::vector<std::string> option_texts;
    int correct_option = 0;  // 1-based
    std::string label;       // for category-selection demos
};

Prompt build_similar_instance_prompt(const data::Dataset& dataset, const std::string& anchor_id,
                                     const std::vector<std::string>& option_ids,
                                     const std::vector<DemoExample>& demos);

Prompt build_characterization_prompt(int cluster_id,
                                     const std::vector<std::string>& representative_texts,
                                     const std::vector<std::string>& demo_names);

Prompt build_category_selection_prompt(const data::Dataset& dataset, const std::string& anchor_id,
                                       const std::vector<CategoryCard>& candidates,
                                       const std::vector<DemoExample>& demos);

// Instance text used in prompts: the text field when present, else the id.
std::string instance_text(const data::Instance& inst);

// Issues the query and assembles the (not yet accepted) record.
FeedbackRecord query_and_record(Provider& provider, const Prompt& prompt);

// Keeps records with an answer and confidence >= min_confidence; sets
// accepted flags in place and returns the accepted subset.
std::vector<FeedbackRecord> filter_feedback(std::vector<FeedbackRecord>& records,
                                            double min_confidence);

struct CharacterizeResult {
    std::map<int, CategoryCard> cards;
    std::vector<FeedbackRecord> records;
};

// One provider query per cluster. `embed_card` supplies the card embedding d
// (encoder-backed or the projected-centroid fallback); it may return an empty
// vector to leave d unset.
CharacterizeResult characterize_clusters(
    const std::map<int, std::vector<std::string>>& representatives, const data::Dataset& dataset,
    const std::vector<std::string>& demo_names, Provider& provider,
    const std::function<std::vector<double>(const CategoryCard&)>& embed_card);

// The ratio*K cards nearest to z_anchor by cosine, descending (ties by
// ascending cluster id). At least one candidate when any card exists.
std::vector<CategoryCard> select_card_candidates(const std::vector<double>& z_anchor,
                                                 const std::map<int, CategoryCard>& cards,
                                                 double candidate_ratio, int K_total);

// One feedback-log line: digest/kind/prompt/response (the replay cache
// schema) plus audit fields (anchor, options, parsed answer, confidence,
// accepted flag, provider).
std::string log_line(const Prompt& prompt, const FeedbackRecord& record);

}  // namespace glean::feedback
