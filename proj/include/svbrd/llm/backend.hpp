#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>

#include "svbrd/error.hpp"
#include "svbrd/llm/prompts.hpp"

namespace svbrd::llm {

struct BackendConfig {
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string model = "gpt-5";
    double temperature = 0.7;
    int max_output_tokens = 2000;
    std::chrono::milliseconds timeout{120000};
    int retry_budget = 3;  ///< retries after the first attempt
    std::chrono::milliseconds initial_backoff{1000};
    std::string api_key_env = "SVBRD_API_KEY";

    void validate() const {
        if (!(temperature >= 0.0 && temperature <= 2.0)) {
            throw Error(ErrorCode::InvalidArgument, "temperature must lie in [0, 2]");
        }
        if (max_output_tokens <= 0) throw Error(ErrorCode::InvalidArgument, "max_output_tokens must be > 0");
        if (retry_budget < 0) throw Error(ErrorCode::InvalidArgument, "retry_budget must be >= 0");
        if (timeout.count() <= 0) throw Error(ErrorCode::InvalidArgument, "timeout must be > 0");
    }
};

/// Transport for one chat-completion exchange. Implementations throw
/// BackendFailure; Timeout, connection failures (status 0), 429 and 5xx are
/// treated as transient by complete().
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string send(const BackendConfig& cfg, const Prompt& prompt) = 0;
};

inline bool is_transient(const BackendFailure& f) {
    if (f.code() == ErrorCode::Timeout) return true;
    return f.status() == 0 || f.status() == 429 || f.status() >= 500;
}

/// Sends the prompt, retrying transient failures with exponential backoff
/// up to the configured retry budget.
inline std::string complete(const BackendConfig& cfg, ChatBackend& backend, const Prompt& prompt) {
    cfg.validate();
    auto delay = cfg.initial_backoff;
    std::string last;
    for (int attempt = 0; attempt <= cfg.retry_budget; ++attempt) {
        try {
            return backend.send(cfg, prompt);
        } catch (const BackendFailure& f) {
            if (!is_transient(f)) throw;
            last = f.what();
        }
        if (attempt < cfg.retry_budget && delay.count() > 0) {
            std::this_thread::sleep_for(delay);
            delay *= 2;
        }
    }
    throw Error(ErrorCode::RetriesExhausted,
                std::to_string(cfg.retry_budget + 1) + " attempts failed; last error: " + last);
}

/// Scripted backend. Responses are looked up by key, most specific first:
///   "<kind>_<subject>#<n>", "<kind>_<subject>", "<kind>#<n>", "<kind>"
/// where n is the 1-based number of calls made so far for that kind and
/// subject. A fixture directory holds one "<key>.txt" file per response.
class MockBackend : public ChatBackend {
public:
    MockBackend() = default;
    explicit MockBackend(std::map<std::string, std::string> responses) : responses_(std::move(responses)) {}

    static MockBackend from_directory(const std::filesystem::path& dir) { return MockBackend(read_fixtures(dir)); }

    /// Every *.txt file in dir, keyed by file stem.
    static std::map<std::string, std::string> read_fixtures(const std::filesystem::path& dir) {
        if (!std::filesystem::is_directory(dir)) {
            throw Error(ErrorCode::IoError, "mock fixture directory '" + dir.string() + "' does not exist");
        }
        std::map<std::string, std::string> responses;
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
            std::ifstream in(entry.path(), std::ios::binary);
            std::stringstream ss;
            ss << in.rdbuf();
            responses[entry.path().stem().string()] = ss.str();
        }
        return responses;
    }

    void set(const std::string& key, std::string response) {
        std::lock_guard lock(mu_);
        responses_[key] = std::move(response);
    }

    std::string send(const BackendConfig&, const Prompt& prompt) override {
        std::lock_guard lock(mu_);
        const std::string kind(to_string(prompt.kind));
        const std::string base = prompt.subject.empty() ? kind : kind + "_" + prompt.subject;
        const int n = ++calls_[base];
        std::vector<std::string> keys;
        if (!prompt.subject.empty()) {
            keys.push_back(base + "#" + std::to_string(n));
            keys.push_back(base);
        }
        keys.push_back(kind + "#" + std::to_string(n));
        keys.push_back(kind);
        for (const auto& k : keys) {
            if (auto it = responses_.find(k); it != responses_.end()) return it->second;
        }
        throw BackendFailure(ErrorCode::BackendError, 404, "", "mock backend has no fixture for '" + base + "'");
    }

    int calls(const std::string& key) const {
        std::lock_guard lock(mu_);
        auto it = calls_.find(key);
        return it == calls_.end() ? 0 : it->second;
    }

private:
    mutable std::mutex mu_;
    std::map<std::string, std::string> responses_;
    std::map<std::string, int> calls_;
};

}  // namespace svbrd::llm
