#include <chrono>
#include <stdexcept>
#include <thread>

#ifdef GLEAN_HAVE_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <json.hpp>

#include "glean/feedback.hpp"

namespace glean::feedback {

using nlohmann::json;

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;    // prefix, no trailing slash
};

SplitUrl split_base_url(const std::string& base_url) {
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) {
        throw std::invalid_argument("base_url must include a scheme: " + base_url);
    }
    const auto path_start = base_url.find('/', scheme_end + 3);
    SplitUrl out;
    if (path_start == std::string::npos) {
        out.origin = base_url;
    } else {
        out.origin = base_url.substr(0, path_start);
        out.path = base_url.substr(path_start);
        while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
    }
    return out;
}

bool retryable_status(int status) {
    return status == 429 || (status >= 500 && status < 600);
}

// One POST with capped exponential backoff. Returns the response body.
std::string post_with_retries(const LiveConfig& config, const std::string& endpoint,
                              const std::string& body) {
    const SplitUrl url = split_base_url(config.base_url);
    httplib::Client client(url.origin);
    client.set_connection_timeout(config.timeout_s, 0);
    client.set_read_timeout(config.timeout_s, 0);

    httplib::Headers headers;
    if (!config.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + config.api_key);
    }

    int backoff_ms = config.initial_backoff_ms;
    std::string last_error;
    for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
            backoff_ms = std::min(backoff_ms * 2, config.max_backoff_ms);
        }
        auto res = client.Post(url.path + endpoint, headers, body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 200) return res->body;
        last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 512);
        if (!retryable_status(res->status)) break;
    }
    throw std::runtime_error("provider request to " + endpoint + " failed: " + last_error);
}

}  // namespace

LiveProvider::LiveProvider(LiveConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) throw std::invalid_argument("live provider needs a base_url");
    if (config_.model.empty()) throw std::invalid_argument("live provider needs a model name");
}

std::string LiveProvider::complete(const Prompt& prompt) {
    json body;
    body["model"] = config_.model;
    body["messages"] = json::array({
        json{{"role", "system"}, {"content", prompt.system}},
        json{{"role", "user"}, {"content", prompt.user}},
    });
    body["temperature"] = 0;

    const std::string raw = post_with_retries(config_, "/chat/completions", body.dump());
    json res;
    try {
        res = json::parse(raw);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("malformed completion response: ") + e.what());
    }
    try {
        return res.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        throw std::runtime_error("completion response missing choices[0].message.content: " +
                                 raw.substr(0, 512));
    }
}

HttpEmbedder::HttpEmbedder(LiveConfig config, std::size_t expected_dim)
    : config_(std::move(config)), dim_(expected_dim) {
    if (config_.base_url.empty()) throw std::invalid_argument("encoder needs a base_url");
    if (config_.model.empty()) throw std::invalid_argument("encoder needs a model name");
}

std::vector<std::vector<double>> HttpEmbedder::embed(const std::vector<std::string>& texts) {
    json body;
    body["model"] = config_.model;
    body["input"] = texts;

    const std::string raw = post_with_retries(config_, "/embeddings", body.dump());
    json res;
    try {
        res = json::parse(raw);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("malformed embeddings response: ") + e.what());
    }
    std::vector<std::vector<double>> out;
    try {
        for (const auto& item : res.at("data")) {
            out.push_back(item.at("embedding").get<std::vector<double>>());
        }
    } catch (const json::exception&) {
        throw std::runtime_error("embeddings response missing data[].embedding");
    }
    if (out.size() != texts.size()) {
        throw std::runtime_error("embeddings response count mismatch");
    }
    for (const auto& v : out) {
        if (dim_ == 0) dim_ = v.size();
        if (v.size() != dim_) throw std::runtime_error("embeddings response dimension mismatch");
    }
    return out;
}

}  // namespace glean::feedback
