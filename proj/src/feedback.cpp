#include "glean/feedback.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "glean/kernels.hpp"
#include "glean/rng.hpp"

namespace glean::feedback {

using nlohmann::json;

std::string kind_to_string(PromptKind k) {
    switch (k) {
        case PromptKind::similar_instance: return "similar_instance";
        case PromptKind::characterization: return "characterization";
        case PromptKind::category_selection: return "category_selection";
    }
    return "unknown";
}

PromptKind kind_from_string(const std::string& s) {
    if (s == "similar_instance") return PromptKind::similar_instance;
    if (s == "characterization") return PromptKind::characterization;
    if (s == "category_selection") return PromptKind::category_selection;
    throw std::invalid_argument("unknown feedback kind: " + s);
}

std::string provider_to_string(ProviderKind k) {
    switch (k) {
        case ProviderKind::live: return "live";
        case ProviderKind::oracle: return "oracle";
        case ProviderKind::replay: return "replay";
    }
    return "unknown";
}

std::string prompt_digest(const Prompt& prompt) {
    std::uint64_t h = fnv1a64(kind_to_string(prompt.kind));
    h = fnv1a64(prompt.system, h ^ 0x1f);
    h = fnv1a64(prompt.user, h ^ 0x1f);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

std::optional<json> extract_json_object(const std::string& raw) {
    const auto first = raw.find('{');
    const auto last = raw.rfind('}');
    if (first == std::string::npos || last == std::string::npos || last < first) return std::nullopt;
    try {
        json j = json::parse(raw.substr(first, last - first + 1));
        if (j.is_object()) return j;
    } catch (const json::exception&) {
    }
    return std::nullopt;
}

std::optional<int> leading_integer(const std::string& raw) {
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (std::isdigit(static_cast<unsigned char>(raw[i]))) {
            int v = 0;
            std::size_t j = i;
            while (j < raw.size() && std::isdigit(static_cast<unsigned char>(raw[j])) && v < 1000000) {
                v = v * 10 + (raw[j] - '0');
                ++j;
            }
            return v;
        }
    }
    return std::nullopt;
}

std::optional<double> confidence_token(const std::string& raw) {
    // number following the word "confidence" (case-insensitive)
    std::string lower(raw.size(), '\0');
    std::transform(raw.begin(), raw.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    const auto pos = lower.find("confidence");
    if (pos == std::string::npos) return std::nullopt;
    for (std::size_t i = pos + 10; i < raw.size(); ++i) {
        const unsigned char c = raw[i];
        if (std::isdigit(c) || c == '.') {
            char* end = nullptr;
            const double v = std::strtod(raw.c_str() + i, &end);
            if (end != raw.c_str() + i) return clamp01(v);
            return std::nullopt;
        }
    }
    return std::nullopt;
}

std::optional<std::string> labeled_line(const std::string& raw, const std::string& key) {
    std::istringstream in(raw);
    std::string line;
    while (std::getline(in, line)) {
        std::string lower(line.size(), '\0');
        std::transform(line.begin(), line.end(), lower.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        const auto pos = lower.find(key + ":");
        if (pos == std::string::npos) continue;
        std::string value = line.substr(pos + key.size() + 1);
        const auto b = value.find_first_not_of(" \t\"");
        const auto e = value.find_last_not_of(" \t\"\r");
        if (b == std::string::npos) continue;
        return value.substr(b, e - b + 1);
    }
    return std::nullopt;
}

}  // namespace

ParsedResponse parse_response(const std::string& raw, PromptKind kind) {
    ParsedResponse out;
    if (auto j = extract_json_object(raw)) {
        if (j->contains("confidence") && (*j)["confidence"].is_number()) {
            out.confidence = clamp01((*j)["confidence"].get<double>());
        }
        if (kind == PromptKind::characterization) {
            if (j->contains("name") && (*j)["name"].is_string()) {
                std::string n = (*j)["name"].get<std::string>();
                if (!n.empty()) out.name = std::move(n);
            }
            if (j->contains("description") && (*j)["description"].is_string()) {
                out.description = (*j)["description"].get<std::string>();
            }
        } else if (j->contains("choice")) {
            const auto& c = (*j)["choice"];
            if (c.is_number_integer()) {
                out.choice = c.get<int>();
            } else if (c.is_string()) {
                if (auto v = leading_integer(c.get<std::string>())) out.choice = *v;
            }
        }
        if (out.choice || out.name) return out;
    }
    // fallback grammar
    if (kind == PromptKind::characterization) {
        if (auto n = labeled_line(raw, "name"); n && !n->empty()) {
            out.name = *n;
            out.description = labeled_line(raw, "description").value_or("");
        }
    } else {
        out.choice = leading_integer(raw);
    }
    if (auto c = confidence_token(raw)) out.confidence = *c;
    if (!out.choice && !out.name) out.confidence = 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// Prompt building

std::string instance_text(const data::Instance& inst) {
    return inst.text && !inst.text->empty() ? *inst.text : inst.id;
}

namespace {

const char* kSimilarSystem =
    "You judge semantic similarity between short texts. Always answer with a JSON object "
    "of the form {\"choice\": <option number>, \"confidence\": <number between 0 and 1>}.";

const char* kCharacterizeSystem =
    "You summarize groups of related short texts into a category. Always answer with a JSON "
    "object of the form {\"name\": <short category name>, \"description\": <one sentence>, "
    "\"confidence\": <number between 0 and 1>}.";

const char* kSelectionSystem =
    "You match a short text to the best-fitting category. Always answer with a JSON object "
    "of the form {\"choice\": <option number>, \"confidence\": <number between 0 and 1>}.";

void append_demos(std::ostringstream& out, const std::vector<DemoExample>& demos,
                  bool with_labels) {
    if (demos.empty()) return;
    out << "Here are worked examples:\n";
    for (const auto& demo : demos) {
        out << "Example query: " << demo.anchor_text << "\n";
        for (std::size_t i = 0; i < demo.option_texts.size(); ++i) {
            out << "  " << (i + 1) << ". " << demo.option_texts[i] << "\n";
        }
        out << "Correct answer: " << demo.correct_option;
        if (with_labels && !demo.label.empty()) out << " (" << demo.label << ")";
        out << "\n";
    }
    out << "\n";
}

}  // namespace

Prompt build_similar_instance_prompt(const data::Dataset& dataset, const std::string& anchor_id,
                                     const std::vector<std::string>& option_ids,
                                     const std::vector<DemoExample>& demos) {
    if (option_ids.empty()) {
        throw std::invalid_argument("similar-instance prompt needs at least one option");
    }
    Prompt p;
    p.kind = PromptKind::similar_instance;
    p.system = kSimilarSystem;
    p.anchor_id = anchor_id;
    p.option_ids = option_ids;
    p.demos_included = !demos.empty();

    std::ostringstream user;
    append_demos(user, demos, false);
    user << "Query: " << instance_text(dataset.by_id(anchor_id)) << "\n\n";
    user << "Which of the following is most similar to the query?\n";
    for (std::size_t i = 0; i < option_ids.size(); ++i) {
        user << (i + 1) << ". " << instance_text(dataset.by_id(option_ids[i])) << "\n";
    }
    user << "\nRespond with JSON: {\"choice\": <option number>, \"confidence\": <0 to 1>}.";
    p.user = user.str();
    return p;
}

Prompt build_characterization_prompt(int cluster_id,
                                     const std::vector<std::string>& representative_texts,
                                     const std::vector<std::string>& demo_names) {
    if (representative_texts.empty()) {
        throw std::invalid_argument("characterization prompt needs representative texts");
    }
    Prompt p;
    p.kind = PromptKind::characterization;
    p.system = kCharacterizeSystem;
    p.anchor_id = std::to_string(cluster_id);
    p.demos_included = !demo_names.empty();

    std::ostringstream user;
    if (!demo_names.empty()) {
        user << "Known categories in this domain include: ";
        for (std::size_t i = 0; i < demo_names.size(); ++i) {
            if (i) user << ", ";
            user << demo_names[i];
        }
        user << ".\n\n";
    }
    user << "The following texts belong to one category:\n";
    for (const auto& text : representative_texts) {
        user << "- " << text << "\n";
    }
    user << "\nGenerate a short category name and a one-sentence description in the same style "
            "as the known categories.\n";
    user << "Respond with JSON: {\"name\": ..., \"description\": ..., \"confidence\": <0 to 1>}.";
    p.user = user.str();
    return p;
}

Prompt build_category_selection_prompt(const data::Dataset& dataset, const std::string& anchor_id,
                                       const std::vector<CategoryCard>& candidates,
                                       const std::vector<DemoExample>& demos) {
    if (candidates.empty()) {
        throw std::invalid_argument("category-selection prompt needs at least one candidate");
    }
    Prompt p;
    p.kind = PromptKind::category_selection;
    p.system = kSelectionSystem;
    p.anchor_id = anchor_id;
    p.demos_included = !demos.empty();

    std::ostringstream user;
    append_demos(user, demos, true);
    user << "Query: " << instance_text(dataset.by_id(anchor_id)) << "\n\n";
    user << "Which category fits the query best?\n";
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        p.option_ids.push_back(std::to_string(candidates[i].cluster));
        user << (i + 1) << ". " << candidates[i].name;
        if (!candidates[i].description.empty()) user << " — " << candidates[i].description;
        user << "\n";
    }
    user << "\nRespond with JSON: {\"choice\": <option number>, \"confidence\": <0 to 1>}.";
    p.user = user.str();
    return p;
}

// ---------------------------------------------------------------------------
// Oracle provider

std::string OracleProvider::complete(const Prompt& prompt) {
    if (!context_ || !context_->dataset) {
        throw std::runtime_error("oracle provider has no ground-truth context");
    }
    const auto& dataset = *context_->dataset;
    Rng rng(derive_seed(config_.seed, "oracle." + prompt_digest(prompt)));
    const bool corrupt = rng.next_double() < config_.epsilon;
    const double confidence = corrupt ? config_.c_lo : config_.c_hi;
    json out;
    out["confidence"] = confidence;

    if (prompt.kind == PromptKind::characterization) {
        auto it = context_->cluster_majority.find(prompt.anchor_id.value_or(""));
        if (it == context_->cluster_majority.end()) {
            throw std::runtime_error("oracle has no majority label for cluster " +
                                     prompt.anchor_id.value_or("?"));
        }
        std::string name = it->second;
        if (corrupt && context_->label_pool.size() > 1) {
            // uniform wrong label
            std::vector<std::string> others;
            for (const auto& l : context_->label_pool) {
                if (l != name) others.push_back(l);
            }
            name = others[rng.next_below(others.size())];
        }
        out["name"] = name;
        out["description"] = "Instances about " + name + ".";
        return out.dump();
    }

    if (!prompt.anchor_id) throw std::runtime_error("oracle prompt without anchor");
    const auto& anchor = dataset.by_id(*prompt.anchor_id);
    if (!anchor.label) throw std::runtime_error("oracle anchor without ground truth: " + anchor.id);
    if (prompt.option_ids.empty()) throw std::runtime_error("oracle prompt without options");

    std::size_t truthful = prompt.option_ids.size();
    if (prompt.kind == PromptKind::similar_instance) {
        for (std::size_t i = 0; i < prompt.option_ids.size(); ++i) {
            const auto& opt = dataset.by_id(prompt.option_ids[i]);
            if (opt.label && *opt.label == *anchor.label) {
                truthful = i;
                break;
            }
        }
        if (truthful == prompt.option_ids.size()) {
            // no same-label candidate: nearest embedding
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < prompt.option_ids.size(); ++i) {
                const auto& opt = dataset.by_id(prompt.option_ids[i]);
                const double d =
                    kernels::l2sq(opt.h.data(), anchor.h.data(), anchor.h.size());
                if (d < best) {
                    best = d;
                    truthful = i;
                }
            }
        }
    } else {  // category_selection
        for (std::size_t i = 0; i < prompt.option_ids.size(); ++i) {
            auto it = context_->cluster_majority.find(prompt.option_ids[i]);
            if (it != context_->cluster_majority.end() && it->second == *anchor.label) {
                truthful = i;
                break;
            }
        }
        // candidates are sorted by descending cosine, so the fallback
        // (highest-similarity card) is the first option
        if (truthful == prompt.option_ids.size()) truthful = 0;
    }

    std::size_t answer = truthful;
    if (corrupt && prompt.option_ids.size() > 1) {
        std::size_t wrong = rng.next_below(prompt.option_ids.size() - 1);
        if (wrong >= truthful) ++wrong;
        answer = wrong;
    }
    out["choice"] = static_cast<int>(answer + 1);
    return out.dump();
}

// ---------------------------------------------------------------------------
// Replay provider

ReplayProvider::ReplayProvider(const std::string& cache_path) {
    std::ifstream in(cache_path);
    if (!in) throw std::runtime_error("cannot open replay cache: " + cache_path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw std::runtime_error(cache_path + ":" + std::to_string(lineno) +
                                     ": malformed cache line: " + e.what());
        }
        if (!j.contains("digest") || !j.contains("response")) {
            throw std::runtime_error(cache_path + ":" + std::to_string(lineno) +
                                     ": cache line missing digest/response");
        }
        cache_[j["digest"].get<std::string>()] = j["response"].get<std::string>();
    }
}

std::string ReplayProvider::complete(const Prompt& prompt) {
    const std::string digest = prompt_digest(prompt);
    auto it = cache_.find(digest);
    if (it == cache_.end()) {
        throw std::runtime_error("replay cache miss for digest " + digest + " (kind " +
                                 kind_to_string(prompt.kind) + ")");
    }
    return it->second;
}

// ---------------------------------------------------------------------------
// Candidate construction

SisCandidates build_sis_candidates(const std::string& anchor_id, const data::Dataset& dataset,
                                   const Matrix& embeddings, const cluster::ClusterModel& model,
                                   int M, std::uint64_t seed) {
    if (M < 1) throw std::invalid_argument("M must be at least 1");
    if (static_cast<std::size_t>(M) > model.k()) {
        throw std::invalid_argument("M exceeds the number of clusters");
    }
    const std::size_t row = dataset.index_of(anchor_id);
    const std::size_t d = embeddings.cols();

    std::vector<std::pair<double, int>> ranked;
    ranked.reserve(model.k());
    for (std::size_t k = 0; k < model.k(); ++k) {
        ranked.emplace_back(kernels::l2sq(embeddings.row(row), model.centroids.row(k), d),
                            static_cast<int>(k));
    }
    std::sort(ranked.begin(), ranked.end());

    auto members = cluster::members_by_cluster(model);
    SisCandidates out;
    for (int m = 0; m < M; ++m) {
        const int cid = ranked[m].second;
        std::vector<std::string> pool;
        for (const auto& id : members[cid]) {
            if (id != anchor_id) pool.push_back(id);
        }
        if (pool.empty()) {
            out.skipped_clusters.push_back(cid);
            continue;
        }
        Rng rng(derive_seed(seed, "sis.cluster", static_cast<std::uint64_t>(cid)));
        out.candidates.push_back(pool[rng.next_below(pool.size())]);
    }
    return out;
}

std::vector<CategoryCard> select_card_candidates(const std::vector<double>& z_anchor,
                                                 const std::map<int, CategoryCard>& cards,
                                                 double candidate_ratio, int K_total) {
    if (cards.empty()) return {};
    const int want = std::max(1, data::round_half_up(candidate_ratio * K_total));
    std::vector<std::pair<double, int>> ranked;  // (-cosine, cluster id)
    ranked.reserve(cards.size());
    for (const auto& [cid, card] : cards) {
        if (card.d.empty()) continue;
        ranked.emplace_back(-embed::cosine(z_anchor, card.d), cid);
    }
    std::sort(ranked.begin(), ranked.end());
    std::vector<CategoryCard> out;
    const std::size_t take = std::min<std::size_t>(want, ranked.size());
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back(cards.at(ranked[i].second));
    return out;
}

// ---------------------------------------------------------------------------
// Records

FeedbackRecord query_and_record(Provider& provider, const Prompt& prompt) {
    FeedbackRecord rec;
    rec.kind = prompt.kind;
    rec.anchor_id = prompt.anchor_id;
    rec.option_ids = prompt.option_ids;
    rec.provider = provider.kind();
    rec.digest = prompt_digest(prompt);
    rec.raw_response = provider.complete(prompt);

    const ParsedResponse parsed = parse_response(rec.raw_response, prompt.kind);
    rec.confidence = parsed.confidence;
    if (prompt.kind == PromptKind::characterization) {
        rec.name = parsed.name;
        rec.description = parsed.description;
    } else if (parsed.choice && *parsed.choice >= 1 &&
               static_cast<std::size_t>(*parsed.choice) <= prompt.option_ids.size()) {
        rec.parsed_choice = static_cast<std::size_t>(*parsed.choice - 1);
    }
    return rec;
}

std::vector<FeedbackRecord> filter_feedback(std::vector<FeedbackRecord>& records,
                                            double min_confidence) {
    if (min_confidence < 0.0 || min_confidence > 1.0) {
        throw std::invalid_argument("confidence threshold must be in [0, 1]");
    }
    std::vector<FeedbackRecord> accepted;
    for (auto& rec : records) {
        const bool has_answer =
            rec.kind == PromptKind::characterization ? rec.name.has_value()
                                                     : rec.parsed_choice.has_value();
        rec.accepted = has_answer && rec.confidence >= min_confidence;
        if (rec.accepted) accepted.push_back(rec);
    }
    return accepted;
}

CharacterizeResult characterize_clusters(
    const std::map<int, std::vector<std::string>>& representatives, const data::Dataset& dataset,
    const std::vector<std::string>& demo_names, Provider& provider,
    const std::function<std::vector<double>(const CategoryCard&)>& embed_card) {
    CharacterizeResult out;
    for (const auto& [cid, rep_ids] : representatives) {
        if (rep_ids.empty()) {
            throw std::runtime_error("cluster " + std::to_string(cid) + " has no representatives");
        }
        std::vector<std::string> texts;
        texts.reserve(rep_ids.size());
        for (const auto& id : rep_ids) texts.push_back(instance_text(dataset.by_id(id)));

        const Prompt prompt = build_characterization_prompt(cid, texts, demo_names);
        FeedbackRecord rec;
        try {
            rec = query_and_record(provider, prompt);
        } catch (const std::exception& e) {
            throw std::runtime_error("characterization failed for cluster " + std::to_string(cid) +
                                     ": " + e.what());
        }

        CategoryCard card;
        card.cluster = cid;
        if (rec.name) {
            card.name = *rec.name;
            card.description = rec.description.value_or("");
        } else {
            // unparseable response; keep the pipeline alive with a placeholder
            card.name = "cluster_" + std::to_string(cid);
        }
        if (embed_card) {
            card.d = embed_card(card);
            if (!card.d.empty()) embed::l2_normalize(card.d);
        }
        out.records.push_back(std::move(rec));
        out.cards.emplace(cid, std::move(card));
    }
    return out;
}

std::string log_line(const Prompt& prompt, const FeedbackRecord& record) {
    json j;
    j["digest"] = record.digest;
    j["kind"] = kind_to_string(record.kind);
    j["prompt"] = {{"system", prompt.system}, {"user", prompt.user}};
    j["response"] = record.raw_response;
    if (record.anchor_id) j["anchor"] = *record.anchor_id;
    if (!record.option_ids.empty()) j["options"] = record.option_ids;
    if (record.parsed_choice) j["choice"] = *record.parsed_choice;
    if (record.name) j["name"] = *record.name;
    if (record.description) j["description"] = *record.description;
    j["confidence"] = record.confidence;
    j["accepted"] = record.accepted;
    j["provider"] = provider_to_string(record.provider);
    return j.dump();
}

}  // namespace glean::feedback
