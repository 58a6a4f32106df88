// Copyright 2026 the trajkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace trajkit::proxy {

class TranslationError : public std::runtime_error {
public:
    TranslationError(int status, const std::string& message, std::string pointer = "")
        : std::runtime_error(message), status_(status), pointer_(std::move(pointer))
    {
    }

    int status() const { return status_; }
    const std::string& pointer() const { return pointer_; }

private:
    int status_;
    std::string pointer_;
};

class UnmappableToolCall : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ToolMappingEntry {
    std::string client_tool;    // Read | Edit | Write | Bash
    std::string scaffold_tool;  // str_replace_editor | bash
    std::string command;        // sub-command selecting the entry; empty for bash
    std::map<std::string, std::string> arg_renames; // client field -> scaffold field
};

/// Bijection between the client tool surface and the scaffold tool surface,
/// including per-pair argument renames and the full scaffold schemas sent
/// upstream in place of the client schemas.
class ToolMapping {
public:
    static ToolMapping from_json(const nlohmann::json& j);
    static ToolMapping from_file(const std::string& path);
    static ToolMapping defaults();

    bool has_client_tool(const std::string& name) const;
    std::vector<std::string> client_tool_names() const;

    /// Scaffold definitions replacing the given client tools, deduplicated.
    std::vector<nlohmann::json> scaffold_definitions_for(
        const std::vector<std::string>& client_tools) const;

    /// Client tool_use -> (scaffold tool name, scaffold arguments).
    std::pair<std::string, nlohmann::json> map_call(const std::string& client_tool,
                                                    const nlohmann::json& input) const;

    /// Scaffold tool call -> (client tool name, client input). Throws
    /// UnmappableToolCall for unknown tools or sub-commands.
    std::pair<std::string, nlohmann::json> unmap_call(const std::string& scaffold_tool,
                                                      const nlohmann::json& arguments) const;

private:
    std::vector<ToolMappingEntry> entries_;
    std::map<std::string, nlohmann::json> scaffold_definitions_;
};

/// Rewrites the training-time working directory to the user's working
/// directory and back. Roots must be absolute and non-nested.
struct PathPolicy {
    std::string canonical_root;
    std::string user_root;

    void validate() const;
    std::string to_canonical(const std::string& text) const; // user -> canonical
    std::string to_user(const std::string& text) const;      // canonical -> user
};

/// Replaces `from` with `to` at path boundaries across chunk splits, holding
/// back only a possible partial match; everything else flushes immediately.
class StreamingRewriter {
public:
    StreamingRewriter(std::string from, std::string to);

    std::string feed(std::string_view chunk);
    std::string finish();

private:
    std::string drain(bool flush);

    std::string from_;
    std::string to_;
    std::string pending_;
};

/// messages-API request -> chat-completions request.
nlohmann::json translate_request(const nlohmann::json& inbound, const ToolMapping& mapping,
                                 const PathPolicy& policy, const std::string& upstream_model);

/// chat-completions response -> messages-API response.
nlohmann::json translate_response(const nlohmann::json& outbound, const ToolMapping& mapping,
                                  const PathPolicy& policy, const std::string& client_model);

struct SseEvent {
    std::string event;
    nlohmann::json data;

    friend bool operator==(const SseEvent&, const SseEvent&) = default;
};

/// Re-frames a chat-completions delta stream as messages-API events. Feed
/// raw SSE bytes from the upstream; text deltas flush per delta (modulo the
/// path-rewrite holdback) and tool-call deltas are assembled before mapping.
class StreamBridge {
public:
    StreamBridge(const ToolMapping& mapping, const PathPolicy& policy, std::string client_model);

    std::vector<SseEvent> feed(std::string_view bytes);
    std::vector<SseEvent> finish();
    /// Terminates the stream after an upstream failure; previously fed
    /// deltas stay delivered.
    std::vector<SseEvent> fail(const std::string& message);

private:
    struct PendingToolCall {
        std::string id;
        std::string name;
        std::string arguments;
    };

    void handle_chunk(const nlohmann::json& chunk, std::vector<SseEvent>& events);
    void ensure_message_start(std::vector<SseEvent>& events);
    void ensure_text_block(std::vector<SseEvent>& events);
    void close_text_block(std::vector<SseEvent>& events);
    void emit_tool_blocks(std::vector<SseEvent>& events);

    const ToolMapping& mapping_;
    const PathPolicy& policy_;
    std::string client_model_;
    StreamingRewriter rewriter_;
    std::string sse_buffer_;
    std::map<int, PendingToolCall> tool_calls_;
    std::string message_id_;
    std::string finish_reason_;
    int output_tokens_ = 0;
    int next_block_index_ = 0;
    bool message_started_ = false;
    bool text_block_open_ = false;
    bool done_ = false;
};

struct ProxyConfig {
    std::string listen_host = "127.0.0.1";
    int listen_port = 0; // 0 = ephemeral
    std::string upstream_base_url;
    std::string model_id;
    std::string canonical_root; // required
    std::string user_root;      // defaults to the process working directory
    std::string tool_mapping_path;

    static ProxyConfig from_json(const nlohmann::json& j);
};

/// HTTP service: POST /v1/messages (with SSE streaming) in, chat-completions
/// out, plus GET /health reporting upstream reachability.
class ProxyServer {
public:
    explicit ProxyServer(ProxyConfig config);
    ~ProxyServer();

    /// Binds and serves on a background thread. Returns the bound port.
    int start();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace trajkit::proxy
