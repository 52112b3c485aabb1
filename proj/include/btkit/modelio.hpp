#pragma once

/// @file modelio.hpp
/// Uniform client for chat-completion endpoints plus deterministic
/// record/replay providers. The wire shape is the de-facto chat
/// completions HTTP/JSON protocol: request {model, messages, max_tokens,
/// temperature, stop}, response {choices[{message{content},
/// finish_reason}], usage{prompt_tokens, completion_tokens}}.
///
/// Recordings key each request by a content hash of (messages, params); a
/// repeated identical request gets a sequence suffix so best-of-N runs
/// replay exactly.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "btkit/prompt.hpp"

namespace btkit {

struct gen_params {
    std::string model;
    int max_new_tokens = 1000;
    double temperature = 0.0;
    std::vector<std::string> stop;
};

enum class finish_reason { stop, length, error };

inline std::string_view finish_reason_name(finish_reason reason) {
    switch (reason) {
        case finish_reason::stop: return "stop";
        case finish_reason::length: return "length";
        case finish_reason::error: return "error";
    }
    return "unknown";
}

struct completion {
    std::string text;
    std::int64_t latency_ms = 0;
    std::optional<int> prompt_tokens;
    std::optional<int> completion_tokens;
    finish_reason finish = finish_reason::stop;
};

class model_io_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class transport_error : public model_io_error {
public:
    using model_io_error::model_io_error;
};

class protocol_error : public model_io_error {
public:
    using model_io_error::model_io_error;
};

class timeout_error : public model_io_error {
public:
    using model_io_error::model_io_error;
};

class missing_recording_error : public model_io_error {
public:
    using model_io_error::model_io_error;
};

class provider {
public:
    virtual ~provider() = default;
    virtual completion complete(const message_list& messages, const gen_params& params) = 0;
};

inline nlohmann::ordered_json messages_to_json(const message_list& messages) {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const chat_message& message : messages) {
        nlohmann::ordered_json item;
        item["role"] = std::string(chat_role_name(message.role));
        item["content"] = message.content;
        out.push_back(std::move(item));
    }
    return out;
}

inline message_list messages_from_json(const nlohmann::json& doc) {
    message_list messages;
    for (const nlohmann::json& item : doc) {
        std::optional<chat_role> role = parse_chat_role(item.at("role").get<std::string>());
        if (!role) throw protocol_error("unknown chat role in message list");
        messages.push_back({*role, item.at("content").get<std::string>()});
    }
    return messages;
}

inline nlohmann::ordered_json params_to_json(const gen_params& params) {
    nlohmann::ordered_json out;
    out["model"] = params.model;
    out["max_tokens"] = params.max_new_tokens;
    out["temperature"] = params.temperature;
    out["stop"] = params.stop;
    return out;
}

/// Stable content hash (FNV-1a 64) of the canonical request JSON.
inline std::string request_key(const message_list& messages, const gen_params& params) {
    nlohmann::ordered_json request;
    request["messages"] = messages_to_json(messages);
    request["params"] = params_to_json(params);
    const std::string canonical = request.dump();
    std::uint64_t hash = 1469598103934665603ull;
    for (unsigned char c : canonical) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    char buffer[17];
    std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(hash));
    return buffer;
}

namespace detail {

inline nlohmann::ordered_json completion_to_json(const completion& c) {
    nlohmann::ordered_json out;
    out["text"] = c.text;
    out["latency_ms"] = c.latency_ms;
    if (c.prompt_tokens) out["prompt_tokens"] = *c.prompt_tokens;
    if (c.completion_tokens) out["completion_tokens"] = *c.completion_tokens;
    out["finish"] = std::string(finish_reason_name(c.finish));
    return out;
}

inline completion completion_from_json(const nlohmann::json& doc) {
    completion c;
    c.text = doc.at("text").get<std::string>();
    c.latency_ms = doc.at("latency_ms").get<std::int64_t>();
    if (doc.contains("prompt_tokens")) c.prompt_tokens = doc["prompt_tokens"].get<int>();
    if (doc.contains("completion_tokens")) {
        c.completion_tokens = doc["completion_tokens"].get<int>();
    }
    const std::string finish = doc.at("finish").get<std::string>();
    c.finish = finish == "length" ? finish_reason::length
               : finish == "error" ? finish_reason::error
                                   : finish_reason::stop;
    return c;
}

}  // namespace detail

struct http_endpoint {
    std::string base_url;  // e.g. "http://127.0.0.1:8000"
    std::string path = "/v1/chat/completions";
    std::string api_key_env = "BTKIT_API_KEY";
    int timeout_sec = 300;
};

/// Live client. Latency is measured around the transport call only.
class http_provider : public provider {
public:
    explicit http_provider(http_endpoint endpoint) : endpoint_(std::move(endpoint)) {}

    completion complete(const message_list& messages, const gen_params& params) override {
        if (params.max_new_tokens < 1) {
            throw model_io_error("max_new_tokens must be >= 1");
        }
        nlohmann::ordered_json body;
        body["model"] = params.model;
        body["messages"] = messages_to_json(messages);
        body["max_tokens"] = params.max_new_tokens;
        body["temperature"] = params.temperature;
        if (!params.stop.empty()) body["stop"] = params.stop;

        httplib::Client client(endpoint_.base_url);
        client.set_connection_timeout(endpoint_.timeout_sec, 0);
        client.set_read_timeout(endpoint_.timeout_sec, 0);
        client.set_write_timeout(endpoint_.timeout_sec, 0);
        httplib::Headers headers;
        if (const char* key = std::getenv(endpoint_.api_key_env.c_str())) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }

        const auto started = std::chrono::steady_clock::now();
        httplib::Result result =
            client.Post(endpoint_.path, headers, body.dump(), "application/json");
        const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - started);

        if (!result) {
            const httplib::Error error = result.error();
            if (error == httplib::Error::ConnectionTimeout || error == httplib::Error::Read ||
                error == httplib::Error::Write) {
                throw timeout_error("request timed out against " + endpoint_.base_url);
            }
            throw transport_error("transport failure against " + endpoint_.base_url + ": " +
                                  httplib::to_string(error));
        }
        if (result->status != 200) {
            throw transport_error("HTTP " + std::to_string(result->status) + " from " +
                                  endpoint_.base_url + ": " + result->body.substr(0, 256));
        }

        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(result->body);
        } catch (const nlohmann::json::exception& e) {
            throw protocol_error(std::string("response is not JSON: ") + e.what());
        }
        if (!doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty()) {
            throw protocol_error("response has no choices");
        }
        const nlohmann::json& choice = doc["choices"][0];
        completion c;
        try {
            c.text = choice.at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            throw protocol_error("choice has no message.content");
        }
        if (choice.contains("finish_reason") && choice["finish_reason"].is_string()) {
            const std::string finish = choice["finish_reason"].get<std::string>();
            c.finish = finish == "length" ? finish_reason::length : finish_reason::stop;
        }
        if (doc.contains("usage") && doc["usage"].is_object()) {
            const nlohmann::json& usage = doc["usage"];
            if (usage.contains("prompt_tokens")) {
                c.prompt_tokens = usage["prompt_tokens"].get<int>();
            }
            if (usage.contains("completion_tokens")) {
                c.completion_tokens = usage["completion_tokens"].get<int>();
            }
        }
        c.latency_ms = elapsed.count();
        return c;
    }

private:
    http_endpoint endpoint_;
};

/// Replays a recorded session. Responses, including latencies, come from
/// the recording, so downstream reports are bit-identical run to run.
class replay_provider : public provider {
public:
    explicit replay_provider(std::filesystem::path directory)
        : directory_(std::move(directory)) {}

    completion complete(const message_list& messages, const gen_params& params) override {
        const std::string key = request_key(messages, params);
        int sequence;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            sequence = sequence_[key]++;
        }
        const std::filesystem::path file =
            directory_ / (key + "-" + std::to_string(sequence) + ".json");
        std::ifstream in(file);
        if (!in) {
            throw missing_recording_error("no recording for request " + key + " (call #" +
                                          std::to_string(sequence + 1) + ") in " +
                                          directory_.string());
        }
        nlohmann::json doc;
        try {
            in >> doc;
        } catch (const nlohmann::json::exception& e) {
            throw protocol_error("recording " + file.string() + " is corrupt: " + e.what());
        }
        return detail::completion_from_json(doc.at("response"));
    }

    /// Replay starts from the first recording of every request again.
    void rewind() {
        std::lock_guard<std::mutex> lock(mutex_);
        sequence_.clear();
    }

private:
    std::filesystem::path directory_;
    std::mutex mutex_;
    std::map<std::string, int> sequence_;
};

/// Wraps a live provider and persists every exchange.
class recording_provider : public provider {
public:
    recording_provider(provider& inner, std::filesystem::path directory)
        : inner_(inner), directory_(std::move(directory)) {
        std::error_code ec;
        std::filesystem::create_directories(directory_, ec);
        if (ec) {
            throw model_io_error("cannot create recording directory " + directory_.string() +
                                 ": " + ec.message());
        }
    }

    completion complete(const message_list& messages, const gen_params& params) override {
        const completion response = inner_.complete(messages, params);
        const std::string key = request_key(messages, params);
        int sequence;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            sequence = sequence_[key]++;
        }
        nlohmann::ordered_json record;
        record["request"]["messages"] = messages_to_json(messages);
        record["request"]["params"] = params_to_json(params);
        record["response"] = detail::completion_to_json(response);
        const std::filesystem::path file =
            directory_ / (key + "-" + std::to_string(sequence) + ".json");
        std::ofstream out(file, std::ios::binary);
        if (!out) throw model_io_error("cannot write recording " + file.string());
        out << record.dump(2) << '\n';
        return response;
    }

private:
    provider& inner_;
    std::filesystem::path directory_;
    std::mutex mutex_;
    std::map<std::string, int> sequence_;
};

}  // namespace btkit
