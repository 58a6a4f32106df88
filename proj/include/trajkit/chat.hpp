// Copyright 2026 the trajkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace trajkit::chat {

/// A tool invocation requested by the model.
struct ToolCallRequest {
    std::string id;
    std::string name;
    nlohmann::json arguments = nlohmann::json::object();

    friend bool operator==(const ToolCallRequest&, const ToolCallRequest&) = default;
};

struct ChatMessage {
    std::string role; // system | user | assistant | tool
    std::string content;
    std::vector<ToolCallRequest> tool_calls; // assistant messages
    std::string tool_call_id;                // tool messages
};

struct ToolDefinition {
    std::string name;
    std::string description;
    nlohmann::json parameters = nlohmann::json::object(); // JSON schema
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    std::vector<ToolDefinition> tools;
    std::optional<double> temperature;
    std::optional<int> max_tokens;
    std::string trace_tag; // request-log label; never sent over the wire
};

struct ChatResponse {
    std::string content;
    std::string reasoning; // reasoning_content when the model exposes it
    std::vector<ToolCallRequest> tool_calls;
    std::string finish_reason;
};

class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ChatEndpoint {
public:
    virtual ~ChatEndpoint() = default;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
};

struct RetryPolicy {
    int attempts = 3;
    int backoff_ms = 200;
};

struct EndpointConfig {
    std::string base_url; // e.g. http://127.0.0.1:8080/v1
    std::string model_id;
    int max_steps = 115;
    double request_timeout_s = 60.0;
    RetryPolicy retry;
    std::string api_key;     // optional bearer token (env pass-through)
    std::vector<std::pair<std::string, std::string>> headers; // extra request headers
    std::string mock_script; // path to a scripted-endpoint rule file

    static EndpointConfig from_json(const nlohmann::json& j);
};

nlohmann::json to_wire_request(const ChatRequest& request);
ChatResponse response_from_wire(const nlohmann::json& j);

/// Chat-completions client over HTTP with retry/backoff. One instance per
/// worker; instances are not thread-safe.
class HttpChatEndpoint : public ChatEndpoint {
public:
    explicit HttpChatEndpoint(EndpointConfig config);
    ChatResponse complete(const ChatRequest& request) override;

private:
    EndpointConfig config_;
    std::string scheme_host_;
    std::string path_prefix_;
};

/// One scripted behavior: fires when every `when_contains` string appears in
/// the request's concatenated message contents, replying with the next item
/// in `responses`.
struct MockRule {
    std::string id;
    std::vector<std::string> when_contains;
    std::vector<nlohmann::json> responses;
    bool repeat_last = false;
};

/// Deterministic in-process endpoint driven by a JSON rule script; keeps a
/// request log for assertions. Thread-safe.
class ScriptedEndpoint : public ChatEndpoint {
public:
    explicit ScriptedEndpoint(std::vector<MockRule> rules);
    static std::shared_ptr<ScriptedEndpoint> from_json(const nlohmann::json& j);
    static std::shared_ptr<ScriptedEndpoint> from_file(const std::string& path);

    ChatResponse complete(const ChatRequest& request) override;

    struct LogEntry {
        std::string tag;
        nlohmann::json request;
    };
    std::vector<LogEntry> request_log() const;

private:
    mutable std::mutex mutex_;
    std::vector<MockRule> rules_;
    std::vector<std::size_t> cursors_;
    std::vector<LogEntry> log_;
};

ChatResponse response_from_script_entry(const nlohmann::json& entry);

} // namespace trajkit::chat
