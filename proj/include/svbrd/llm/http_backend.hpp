#pragma once

// Chat-completion transport over HTTP(S). Consumers that need https must
// define CPPHTTPLIB_OPENSSL_SUPPORT and link OpenSSL.

#include <cstdlib>
#include <regex>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "svbrd/error.hpp"
#include "svbrd/llm/backend.hpp"

namespace svbrd::llm {

struct Endpoint {
    std::string scheme_host_port;  ///< e.g. "https://api.example.com:443"
    std::string path;
};

inline Endpoint parse_endpoint(const std::string& url) {
    static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) throw Error(ErrorCode::InvalidArgument, "malformed endpoint URL '" + url + "'");
    return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

/// Body of a chat-completion request in the common wire schema.
inline nlohmann::json chat_request_body(const BackendConfig& cfg, const Prompt& prompt) {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& m : prompt.messages) {
        messages.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
    }
    return {{"model", cfg.model},
            {"messages", std::move(messages)},
            {"temperature", cfg.temperature},
            {"max_tokens", cfg.max_output_tokens}};
}

/// Text of the first choice of a chat-completion response.
inline std::string extract_completion_text(const std::string& body) {
    try {
        const auto j = nlohmann::json::parse(body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw BackendFailure(ErrorCode::BackendError, 200, body, std::string("unexpected response shape: ") + e.what());
    }
}

class HttpBackend : public ChatBackend {
public:
    std::string send(const BackendConfig& cfg, const Prompt& prompt) override {
        const auto ep = parse_endpoint(cfg.endpoint);
        httplib::Client client(ep.scheme_host_port);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg.timeout);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg.timeout - secs);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        client.set_write_timeout(secs.count(), usecs.count());

        httplib::Headers headers;
        if (const char* key = std::getenv(cfg.api_key_env.c_str()); key && *key) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }
        const auto res = client.Post(ep.path, headers, chat_request_body(cfg, prompt).dump(), "application/json");
        if (!res) {
            const auto err = res.error();
            if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
                throw BackendFailure(ErrorCode::Timeout, 0, "", "request to " + cfg.endpoint + " timed out");
            }
            throw BackendFailure(ErrorCode::BackendError, 0, "",
                                 "request to " + cfg.endpoint + " failed: " + httplib::to_string(err));
        }
        if (res->status < 200 || res->status >= 300) {
            throw BackendFailure(ErrorCode::BackendError, res->status, res->body,
                                 "backend returned HTTP " + std::to_string(res->status));
        }
        return extract_completion_text(res->body);
    }
};

}  // namespace svbrd::llm
