// Copyright 2026 the trajkit authors
// SPDX-License-Identifier: Apache-2.0

#include "trajkit/proxy.hpp"

#include <atomic>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <thread>

#include "httplib.h"

namespace trajkit::proxy {

namespace {

bool is_path_char(char c)
{
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
}

// Boundary-aware whole-root replacement; a root followed by a path-name
// character is a different directory and stays untouched.
std::string replace_root(const std::string& text, const std::string& from, const std::string& to)
{
    if (from.empty() || from == to)
        return text;
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t hit = text.find(from, pos);
        if (hit == std::string::npos) {
            out.append(text, pos, text.size() - pos);
            break;
        }
        out.append(text, pos, hit - pos);
        std::size_t after = hit + from.size();
        if (after >= text.size() || !is_path_char(text[after])) {
            out += to;
        } else {
            out += from;
        }
        pos = after;
    }
    return out;
}

nlohmann::json rewrite_strings(const nlohmann::json& value,
                               const std::function<std::string(const std::string&)>& rewrite)
{
    if (value.is_string())
        return rewrite(value.get<std::string>());
    if (value.is_object()) {
        nlohmann::json out = nlohmann::json::object();
        for (const auto& [key, item] : value.items())
            out[key] = rewrite_strings(item, rewrite);
        return out;
    }
    if (value.is_array()) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& item : value)
            out.push_back(rewrite_strings(item, rewrite));
        return out;
    }
    return value;
}

std::string flatten_content(const nlohmann::json& content)
{
    if (content.is_string())
        return content.get<std::string>();
    std::string out;
    if (content.is_array())
        for (const auto& block : content)
            if (block.value("type", "") == "text")
                out += block.value("text", "");
    return out;
}

std::string map_finish_reason(const std::string& reason)
{
    if (reason == "tool_calls")
        return "tool_use";
    if (reason == "length")
        return "max_tokens";
    return "end_turn";
}

} // namespace

ToolMapping ToolMapping::from_json(const nlohmann::json& j)
{
    ToolMapping mapping;
    for (const auto& t : j.at("tools")) {
        ToolMappingEntry entry;
        entry.client_tool = t.at("client").get<std::string>();
        entry.scaffold_tool = t.at("scaffold").get<std::string>();
        entry.command = t.value("command", "");
        if (t.contains("args"))
            for (const auto& [client_field, scaffold_field] : t.at("args").items())
                entry.arg_renames[client_field] = scaffold_field.get<std::string>();
        mapping.entries_.push_back(std::move(entry));
    }
    for (const auto& [name, definition] : j.at("scaffold_definitions").items())
        mapping.scaffold_definitions_[name] = definition;
    for (const auto& entry : mapping.entries_)
        if (!mapping.scaffold_definitions_.count(entry.scaffold_tool))
            throw std::invalid_argument("tool mapping lacks a scaffold definition for "
                                        + entry.scaffold_tool);
    return mapping;
}

ToolMapping ToolMapping::from_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open tool mapping: " + path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
}

ToolMapping ToolMapping::defaults()
{
    static const char* kDefault = R"({
      "tools": [
        {"client": "Read", "scaffold": "str_replace_editor", "command": "view",
         "args": {"file_path": "path"}},
        {"client": "Edit", "scaffold": "str_replace_editor", "command": "str_replace",
         "args": {"file_path": "path", "old_string": "old_str", "new_string": "new_str"}},
        {"client": "Write", "scaffold": "str_replace_editor", "command": "create",
         "args": {"file_path": "path", "content": "file_text"}},
        {"client": "Bash", "scaffold": "bash", "args": {"command": "command"}}
      ],
      "scaffold_definitions": {
        "str_replace_editor": {
          "name": "str_replace_editor",
          "description": "Custom editing tool for viewing, creating and editing files.",
          "parameters": {
            "type": "object",
            "properties": {
              "command": {"type": "string", "enum": ["view", "create", "str_replace", "insert", "undo_edit"]},
              "path": {"type": "string"},
              "file_text": {"type": "string"},
              "old_str": {"type": "string"},
              "new_str": {"type": "string"},
              "insert_line": {"type": "integer"},
              "view_range": {"type": "array", "items": {"type": "integer"}}
            },
            "required": ["command", "path"]
          }
        },
        "bash": {
          "name": "bash",
          "description": "Run commands in a bash shell.",
          "parameters": {
            "type": "object",
            "properties": {"command": {"type": "string"}},
            "required": ["command"]
          }
        }
      }
    })";
    return from_json(nlohmann::json::parse(kDefault));
}

bool ToolMapping::has_client_tool(const std::string& name) const
{
    for (const auto& entry : entries_)
        if (entry.client_tool == name)
            return true;
    return false;
}

std::vector<std::string> ToolMapping::client_tool_names() const
{
    std::vector<std::string> names;
    for (const auto& entry : entries_)
        names.push_back(entry.client_tool);
    return names;
}

std::vector<nlohmann::json> ToolMapping::scaffold_definitions_for(
    const std::vector<std::string>& client_tools) const
{
    std::vector<nlohmann::json> definitions;
    std::set<std::string> seen;
    for (const std::string& client : client_tools) {
        for (const auto& entry : entries_) {
            if (entry.client_tool != client)
                continue;
            if (seen.insert(entry.scaffold_tool).second)
                definitions.push_back(scaffold_definitions_.at(entry.scaffold_tool));
            break;
        }
    }
    return definitions;
}

std::pair<std::string, nlohmann::json> ToolMapping::map_call(const std::string& client_tool,
                                                             const nlohmann::json& input) const
{
    for (const auto& entry : entries_) {
        if (entry.client_tool != client_tool)
            continue;
        nlohmann::json arguments = nlohmann::json::object();
        if (!entry.command.empty())
            arguments["command"] = entry.command;
        for (const auto& [key, value] : input.items()) {
            auto rename = entry.arg_renames.find(key);
            arguments[rename == entry.arg_renames.end() ? key : rename->second] = value;
        }
        return {entry.scaffold_tool, arguments};
    }
    throw UnmappableToolCall("unknown client tool: " + client_tool);
}

std::pair<std::string, nlohmann::json> ToolMapping::unmap_call(const std::string& scaffold_tool,
                                                               const nlohmann::json& arguments) const
{
    // The "command" argument discriminates sub-commands only for tools that
    // declare them; for single-entry tools like bash it is a plain argument.
    bool has_subcommands = false;
    for (const auto& entry : entries_)
        if (entry.scaffold_tool == scaffold_tool && !entry.command.empty())
            has_subcommands = true;
    std::string command = has_subcommands ? arguments.value("command", "") : "";
    for (const auto& entry : entries_) {
        if (entry.scaffold_tool != scaffold_tool || entry.command != command)
            continue;
        std::map<std::string, std::string> inverse;
        for (const auto& [client_field, scaffold_field] : entry.arg_renames)
            inverse[scaffold_field] = client_field;
        nlohmann::json input = nlohmann::json::object();
        for (const auto& [key, value] : arguments.items()) {
            if (key == "command" && !entry.command.empty())
                continue;
            auto rename = inverse.find(key);
            input[rename == inverse.end() ? key : rename->second] = value;
        }
        return {entry.client_tool, input};
    }
    throw UnmappableToolCall("unmappable scaffold tool call: " + scaffold_tool
                             + (command.empty() ? "" : " command=" + command));
}

void PathPolicy::validate() const
{
    if (canonical_root.empty() || canonical_root.front() != '/')
        throw std::invalid_argument("canonical_root must be an absolute path");
    if (user_root.empty() || user_root.front() != '/')
        throw std::invalid_argument("user_root must be an absolute path");
    if (canonical_root == user_root)
        return;
    auto nested = [](const std::string& outer, const std::string& inner) {
        return inner.size() > outer.size() && inner.compare(0, outer.size(), outer) == 0
            && inner[outer.size()] == '/';
    };
    if (nested(canonical_root, user_root) || nested(user_root, canonical_root))
        throw std::invalid_argument("canonical_root and user_root must not be nested");
}

std::string PathPolicy::to_canonical(const std::string& text) const
{
    return replace_root(text, user_root, canonical_root);
}

std::string PathPolicy::to_user(const std::string& text) const
{
    return replace_root(text, canonical_root, user_root);
}

StreamingRewriter::StreamingRewriter(std::string from, std::string to)
    : from_(std::move(from)), to_(std::move(to))
{
}

std::string StreamingRewriter::drain(bool flush)
{
    if (from_.empty() || from_ == to_) {
        std::string out = std::move(pending_);
        pending_.clear();
        return out;
    }
    std::string out;
    std::size_t i = 0;
    while (i < pending_.size()) {
        if (pending_.compare(i, std::min(from_.size(), pending_.size() - i), from_, 0,
                             std::min(from_.size(), pending_.size() - i))
            == 0) {
            if (pending_.size() - i < from_.size()) {
                // A proper prefix of the needle ends the buffer: hold it.
                if (flush) {
                    out.append(pending_, i, pending_.size() - i);
                    i = pending_.size();
                }
                break;
            }
            std::size_t after = i + from_.size();
            if (after == pending_.size() && !flush)
                break; // boundary unknown until the next chunk
            if (after == pending_.size() || !is_path_char(pending_[after])) {
                out += to_;
                i = after;
                continue;
            }
            out += pending_[i];
            ++i;
            continue;
        }
        out += pending_[i];
        ++i;
    }
    pending_.erase(0, i);
    return out;
}

std::string StreamingRewriter::feed(std::string_view chunk)
{
    pending_.append(chunk);
    return drain(false);
}

std::string StreamingRewriter::finish()
{
    return drain(true);
}

nlohmann::json translate_request(const nlohmann::json& inbound, const ToolMapping& mapping,
                                 const PathPolicy& policy, const std::string& upstream_model)
{
    if (!inbound.is_object())
        throw TranslationError(400, "request body must be a JSON object", "/");
    if (!inbound.contains("messages") || !inbound.at("messages").is_array())
        throw TranslationError(400, "request must carry a messages array", "/messages");

    auto to_canonical = [&policy](const std::string& s) { return policy.to_canonical(s); };
    nlohmann::json messages = nlohmann::json::array();

    if (inbound.contains("system")) {
        std::string system = flatten_content(inbound.at("system"));
        if (!system.empty())
            messages.push_back({{"role", "system"}, {"content", policy.to_canonical(system)}});
    }

    for (std::size_t m = 0; m < inbound.at("messages").size(); ++m) {
        const auto& message = inbound.at("messages").at(m);
        std::string role = message.value("role", "");
        if (role != "user" && role != "assistant")
            throw TranslationError(400, "unsupported message role: " + role,
                                   "/messages/" + std::to_string(m) + "/role");
        const auto& content = message.at("content");

        if (content.is_string()) {
            messages.push_back({{"role", role},
                                {"content", policy.to_canonical(content.get<std::string>())}});
            continue;
        }

        std::string text;
        nlohmann::json tool_calls = nlohmann::json::array();
        for (const auto& block : content) {
            std::string type = block.value("type", "");
            if (type == "text") {
                text += block.value("text", "");
            } else if (type == "tool_use") {
                std::string name = block.value("name", "");
                if (!mapping.has_client_tool(name)) {
                    nlohmann::json known = mapping.client_tool_names();
                    throw TranslationError(400,
                                           "unknown tool name '" + name + "'; known tools: "
                                               + known.dump(),
                                           "/messages/" + std::to_string(m) + "/content");
                }
                auto [scaffold_name, arguments] = mapping.map_call(
                    name, rewrite_strings(block.value("input", nlohmann::json::object()),
                                          to_canonical));
                tool_calls.push_back({{"id", block.value("id", "")},
                                      {"type", "function"},
                                      {"function",
                                       {{"name", scaffold_name},
                                        {"arguments", arguments.dump()}}}});
            } else if (type == "tool_result") {
                std::string result = flatten_content(block.value("content", nlohmann::json()));
                messages.push_back({{"role", "tool"},
                                    {"tool_call_id", block.value("tool_use_id", "")},
                                    {"content", policy.to_canonical(result)}});
            }
        }
        if (role == "assistant") {
            nlohmann::json out{{"role", "assistant"}, {"content", policy.to_canonical(text)}};
            if (!tool_calls.empty())
                out["tool_calls"] = tool_calls;
            messages.push_back(std::move(out));
        } else if (!text.empty() || content.empty()) {
            messages.push_back({{"role", "user"}, {"content", policy.to_canonical(text)}});
        }
    }

    nlohmann::json outbound{{"model", upstream_model}, {"messages", std::move(messages)}};

    if (inbound.contains("tools")) {
        std::vector<std::string> client_tools;
        for (const auto& tool : inbound.at("tools")) {
            std::string name = tool.value("name", "");
            if (!mapping.has_client_tool(name)) {
                nlohmann::json known = mapping.client_tool_names();
                throw TranslationError(400,
                                       "unknown tool name '" + name + "'; known tools: "
                                           + known.dump(),
                                       "/tools");
            }
            client_tools.push_back(name);
        }
        nlohmann::json tools = nlohmann::json::array();
        for (const auto& definition : mapping.scaffold_definitions_for(client_tools))
            tools.push_back({{"type", "function"},
                             {"function",
                              {{"name", definition.at("name")},
                               {"description", definition.value("description", "")},
                               {"parameters", definition.value("parameters",
                                                               nlohmann::json::object())}}}});
        outbound["tools"] = std::move(tools);
    }

    if (inbound.contains("tool_choice")) {
        const auto& choice = inbound.at("tool_choice");
        std::string type = choice.value("type", "auto");
        if (type == "any")
            outbound["tool_choice"] = "required";
        else if (type == "tool" && choice.contains("name")) {
            std::string name = choice.at("name").get<std::string>();
            if (!mapping.has_client_tool(name))
                throw TranslationError(400, "unknown tool name '" + name + "' in tool_choice",
                                       "/tool_choice");
            auto [scaffold_name, ignored] = mapping.map_call(name, nlohmann::json::object());
            (void)ignored;
            outbound["tool_choice"] = {{"type", "function"},
                                       {"function", {{"name", scaffold_name}}}};
        } else {
            outbound["tool_choice"] = "auto";
        }
    }

    // Field-by-name mappings; anything else is dropped with a debug note.
    static const std::set<std::string> kKnown{"model",       "messages",       "system",
                                              "tools",       "max_tokens",     "temperature",
                                              "top_p",       "stop_sequences", "stream",
                                              "metadata",    "tool_choice",    "anthropic_version"};
    if (inbound.contains("max_tokens"))
        outbound["max_tokens"] = inbound.at("max_tokens");
    if (inbound.contains("temperature"))
        outbound["temperature"] = inbound.at("temperature");
    if (inbound.contains("top_p"))
        outbound["top_p"] = inbound.at("top_p");
    if (inbound.contains("stop_sequences"))
        outbound["stop"] = inbound.at("stop_sequences");
    if (inbound.contains("stream"))
        outbound["stream"] = inbound.at("stream");
    for (const auto& [key, value] : inbound.items())
        if (!kKnown.count(key))
            std::cerr << "debug: dropping unknown request field '" << key << "'\n";

    return outbound;
}

nlohmann::json translate_response(const nlohmann::json& outbound, const ToolMapping& mapping,
                                  const PathPolicy& policy, const std::string& client_model)
{
    if (!outbound.contains("choices") || outbound.at("choices").empty())
        throw TranslationError(502, "upstream response carries no choices");
    const auto& choice = outbound.at("choices").at(0);
    const auto& message = choice.at("message");

    auto to_user = [&policy](const std::string& s) { return policy.to_user(s); };
    nlohmann::json content = nlohmann::json::array();
    if (message.contains("content") && message.at("content").is_string()) {
        std::string text = message.at("content").get<std::string>();
        if (!text.empty())
            content.push_back({{"type", "text"}, {"text", policy.to_user(text)}});
    }
    if (message.contains("tool_calls")) {
        for (const auto& call : message.at("tool_calls")) {
            std::string scaffold_name = call.at("function").at("name").get<std::string>();
            nlohmann::json arguments;
            const auto& raw = call.at("function").at("arguments");
            if (raw.is_string()) {
                arguments = nlohmann::json::parse(raw.get<std::string>(), nullptr, false);
                if (arguments.is_discarded())
                    arguments = nlohmann::json::object();
            } else {
                arguments = raw;
            }
            try {
                auto [client_name, input] = mapping.unmap_call(scaffold_name, arguments);
                content.push_back({{"type", "tool_use"},
                                   {"id", call.value("id", "")},
                                   {"name", client_name},
                                   {"input", rewrite_strings(input, to_user)}});
            } catch (const UnmappableToolCall& e) {
                content.push_back({{"type", "text"},
                                   {"text", std::string("[proxy] ") + e.what()}});
            }
        }
    }

    std::string stop_reason = map_finish_reason(choice.value("finish_reason", "stop"));
    nlohmann::json usage{{"input_tokens", 0}, {"output_tokens", 0}};
    if (outbound.contains("usage")) {
        usage["input_tokens"] = outbound.at("usage").value("prompt_tokens", 0);
        usage["output_tokens"] = outbound.at("usage").value("completion_tokens", 0);
    }

    return {{"id", outbound.value("id", "msg_proxy")},
            {"type", "message"},
            {"role", "assistant"},
            {"model", client_model},
            {"content", std::move(content)},
            {"stop_reason", stop_reason},
            {"stop_sequence", nullptr},
            {"usage", std::move(usage)}};
}

StreamBridge::StreamBridge(const ToolMapping& mapping, const PathPolicy& policy,
                           std::string client_model)
    : mapping_(mapping),
      policy_(policy),
      client_model_(std::move(client_model)),
      rewriter_(policy.canonical_root, policy.user_root)
{
}

void StreamBridge::ensure_message_start(std::vector<SseEvent>& events)
{
    if (message_started_)
        return;
    message_started_ = true;
    events.push_back({"message_start",
                      {{"type", "message_start"},
                       {"message",
                        {{"id", message_id_.empty() ? "msg_stream" : message_id_},
                         {"type", "message"},
                         {"role", "assistant"},
                         {"model", client_model_},
                         {"content", nlohmann::json::array()},
                         {"usage", {{"input_tokens", 0}, {"output_tokens", 0}}}}}}});
}

void StreamBridge::ensure_text_block(std::vector<SseEvent>& events)
{
    if (text_block_open_)
        return;
    text_block_open_ = true;
    events.push_back({"content_block_start",
                      {{"type", "content_block_start"},
                       {"index", next_block_index_},
                       {"content_block", {{"type", "text"}, {"text", ""}}}}});
}

void StreamBridge::close_text_block(std::vector<SseEvent>& events)
{
    if (!text_block_open_)
        return;
    std::string rest = rewriter_.finish();
    if (!rest.empty())
        events.push_back({"content_block_delta",
                          {{"type", "content_block_delta"},
                           {"index", next_block_index_},
                           {"delta", {{"type", "text_delta"}, {"text", rest}}}}});
    events.push_back({"content_block_stop",
                      {{"type", "content_block_stop"}, {"index", next_block_index_}}});
    text_block_open_ = false;
    ++next_block_index_;
}

void StreamBridge::emit_tool_blocks(std::vector<SseEvent>& events)
{
    auto to_user = [this](const std::string& s) { return policy_.to_user(s); };
    for (const auto& [index, call] : tool_calls_) {
        nlohmann::json arguments = nlohmann::json::parse(call.arguments, nullptr, false);
        if (arguments.is_discarded())
            arguments = nlohmann::json::object();
        std::string name = call.name;
        nlohmann::json input;
        try {
            auto mapped = mapping_.unmap_call(call.name, arguments);
            name = mapped.first;
            input = rewrite_strings(mapped.second, to_user);
        } catch (const UnmappableToolCall& e) {
            events.push_back({"content_block_start",
                              {{"type", "content_block_start"},
                               {"index", next_block_index_},
                               {"content_block", {{"type", "text"}, {"text", ""}}}}});
            events.push_back({"content_block_delta",
                              {{"type", "content_block_delta"},
                               {"index", next_block_index_},
                               {"delta",
                                {{"type", "text_delta"},
                                 {"text", std::string("[proxy] ") + e.what()}}}}});
            events.push_back({"content_block_stop",
                              {{"type", "content_block_stop"}, {"index", next_block_index_}}});
            ++next_block_index_;
            continue;
        }
        events.push_back({"content_block_start",
                          {{"type", "content_block_start"},
                           {"index", next_block_index_},
                           {"content_block",
                            {{"type", "tool_use"},
                             {"id", call.id.empty() ? "toolu_" + std::to_string(index) : call.id},
                             {"name", name},
                             {"input", nlohmann::json::object()}}}}});
        events.push_back({"content_block_delta",
                          {{"type", "content_block_delta"},
                           {"index", next_block_index_},
                           {"delta",
                            {{"type", "input_json_delta"}, {"partial_json", input.dump()}}}}});
        events.push_back({"content_block_stop",
                          {{"type", "content_block_stop"}, {"index", next_block_index_}}});
        ++next_block_index_;
    }
    tool_calls_.clear();
}

void StreamBridge::handle_chunk(const nlohmann::json& chunk, std::vector<SseEvent>& events)
{
    if (message_id_.empty() && chunk.contains("id"))
        message_id_ = chunk.value("id", "");
    ensure_message_start(events);
    if (!chunk.contains("choices") || chunk.at("choices").empty()) {
        if (chunk.contains("usage") && !chunk.at("usage").is_null())
            output_tokens_ = chunk.at("usage").value("completion_tokens", 0);
        return;
    }
    const auto& choice = chunk.at("choices").at(0);
    if (chunk.contains("usage") && !chunk.at("usage").is_null())
        output_tokens_ = chunk.at("usage").value("completion_tokens", 0);

    if (choice.contains("delta")) {
        const auto& delta = choice.at("delta");
        if (delta.contains("content") && delta.at("content").is_string()) {
            std::string text = delta.at("content").get<std::string>();
            if (!text.empty()) {
                ensure_text_block(events);
                std::string rewritten = rewriter_.feed(text);
                if (!rewritten.empty())
                    events.push_back({"content_block_delta",
                                      {{"type", "content_block_delta"},
                                       {"index", next_block_index_},
                                       {"delta",
                                        {{"type", "text_delta"}, {"text", rewritten}}}}});
            }
        }
        if (delta.contains("tool_calls")) {
            for (const auto& call : delta.at("tool_calls")) {
                int index = call.value("index", 0);
                PendingToolCall& pending = tool_calls_[index];
                if (call.contains("id") && call.at("id").is_string())
                    pending.id = call.at("id").get<std::string>();
                if (call.contains("function")) {
                    const auto& function = call.at("function");
                    if (function.contains("name") && function.at("name").is_string())
                        pending.name += function.at("name").get<std::string>();
                    if (function.contains("arguments") && function.at("arguments").is_string())
                        pending.arguments += function.at("arguments").get<std::string>();
                }
            }
        }
    }
    if (choice.contains("finish_reason") && choice.at("finish_reason").is_string())
        finish_reason_ = choice.at("finish_reason").get<std::string>();
}

std::vector<SseEvent> StreamBridge::feed(std::string_view bytes)
{
    std::vector<SseEvent> events;
    if (done_)
        return events;
    sse_buffer_.append(bytes);
    std::size_t start = 0;
    while (true) {
        std::size_t end = sse_buffer_.find("\n\n", start);
        if (end == std::string::npos)
            break;
        std::string frame = sse_buffer_.substr(start, end - start);
        start = end + 2;
        std::size_t data_pos = frame.find("data:");
        if (data_pos == std::string::npos)
            continue;
        std::string payload = frame.substr(data_pos + 5);
        while (!payload.empty() && payload.front() == ' ')
            payload.erase(payload.begin());
        if (payload == "[DONE]") {
            auto tail = finish();
            events.insert(events.end(), tail.begin(), tail.end());
            break;
        }
        auto chunk = nlohmann::json::parse(payload, nullptr, false);
        if (!chunk.is_discarded())
            handle_chunk(chunk, events);
    }
    sse_buffer_.erase(0, start);
    return events;
}

std::vector<SseEvent> StreamBridge::finish()
{
    std::vector<SseEvent> events;
    if (done_)
        return events;
    done_ = true;
    ensure_message_start(events);
    close_text_block(events);
    emit_tool_blocks(events);
    events.push_back({"message_delta",
                      {{"type", "message_delta"},
                       {"delta",
                        {{"stop_reason", map_finish_reason(finish_reason_)},
                         {"stop_sequence", nullptr}}},
                       {"usage", {{"output_tokens", output_tokens_}}}}});
    events.push_back({"message_stop", {{"type", "message_stop"}}});
    return events;
}

std::vector<SseEvent> StreamBridge::fail(const std::string& message)
{
    std::vector<SseEvent> events;
    if (done_)
        return events;
    done_ = true;
    ensure_message_start(events);
    close_text_block(events);
    events.push_back({"error",
                      {{"type", "error"},
                       {"error", {{"type", "upstream_error"}, {"message", message}}}}});
    return events;
}

ProxyConfig ProxyConfig::from_json(const nlohmann::json& j)
{
    ProxyConfig config;
    config.listen_host = j.value("listen_host", "127.0.0.1");
    config.listen_port = j.value("listen_port", 0);
    config.upstream_base_url = j.at("upstream_base_url").get<std::string>();
    config.model_id = j.value("model_id", "");
    config.canonical_root = j.at("canonical_root").get<std::string>();
    config.user_root = j.value("user_root", std::filesystem::current_path().string());
    config.tool_mapping_path = j.value("tool_mapping", "");
    return config;
}

struct ProxyServer::Impl {
    ProxyConfig config;
    ToolMapping mapping;
    PathPolicy policy;
    std::string upstream_host;
    std::string upstream_prefix;
    httplib::Server server;
    std::thread thread;
    int port = 0;

    explicit Impl(ProxyConfig cfg)
        : config(std::move(cfg)),
          mapping(config.tool_mapping_path.empty() ? ToolMapping::defaults()
                                                   : ToolMapping::from_file(config.tool_mapping_path))
    {
        policy.canonical_root = config.canonical_root;
        policy.user_root = config.user_root;
        policy.validate();

        auto scheme_end = config.upstream_base_url.find("://");
        if (scheme_end == std::string::npos)
            throw std::invalid_argument("upstream_base_url must include a scheme");
        auto path_start = config.upstream_base_url.find('/', scheme_end + 3);
        if (path_start == std::string::npos) {
            upstream_host = config.upstream_base_url;
        } else {
            upstream_host = config.upstream_base_url.substr(0, path_start);
            upstream_prefix = config.upstream_base_url.substr(path_start);
            while (!upstream_prefix.empty() && upstream_prefix.back() == '/')
                upstream_prefix.pop_back();
        }
        install_routes();
    }

    static void write_error(httplib::Response& res, int status, const std::string& message,
                            const std::string& pointer = "")
    {
        nlohmann::json error{{"type", "error"},
                             {"error", {{"type", "invalid_request_error"}, {"message", message}}}};
        if (!pointer.empty())
            error["error"]["pointer"] = pointer;
        res.status = status;
        res.set_content(error.dump(), "application/json");
    }

    void install_routes()
    {
        server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
            httplib::Client client(upstream_host);
            client.set_connection_timeout(std::chrono::seconds(2));
            client.set_read_timeout(std::chrono::seconds(2));
            auto upstream = client.Get(upstream_prefix + "/models");
            nlohmann::json health{{"status", "ok"},
                                  {"upstream", upstream ? "reachable" : "unreachable"}};
            res.set_content(health.dump(), "application/json");
        });

        server.Post("/v1/messages", [this](const httplib::Request& req, httplib::Response& res) {
            nlohmann::json inbound = nlohmann::json::parse(req.body, nullptr, false);
            if (inbound.is_discarded()) {
                write_error(res, 400, "request body is not valid JSON", "/");
                return;
            }
            bool stream = inbound.value("stream", false);
            nlohmann::json outbound_request;
            try {
                outbound_request = translate_request(inbound, mapping, policy, config.model_id);
            } catch (const TranslationError& e) {
                write_error(res, e.status(), e.what(), e.pointer());
                return;
            }
            if (stream)
                handle_streaming(inbound, std::move(outbound_request), res);
            else
                handle_unary(inbound, std::move(outbound_request), res);
        });
    }

    void handle_unary(const nlohmann::json& inbound, nlohmann::json outbound_request,
                      httplib::Response& res)
    {
        httplib::Client client(upstream_host);
        client.set_read_timeout(std::chrono::seconds(120));
        auto upstream = client.Post(upstream_prefix + "/chat/completions",
                                    outbound_request.dump(), "application/json");
        if (!upstream) {
            write_error(res, 502, "upstream unreachable: " + httplib::to_string(upstream.error()));
            return;
        }
        if (upstream->status != 200) {
            write_error(res, 502,
                        "upstream returned status " + std::to_string(upstream->status) + ": "
                            + upstream->body);
            return;
        }
        auto outbound = nlohmann::json::parse(upstream->body, nullptr, false);
        if (outbound.is_discarded()) {
            write_error(res, 502, "upstream returned unparseable JSON");
            return;
        }
        try {
            nlohmann::json reply = translate_response(outbound, mapping, policy,
                                                      inbound.value("model", config.model_id));
            res.set_content(reply.dump(), "application/json");
        } catch (const TranslationError& e) {
            write_error(res, e.status(), e.what());
        }
    }

    void handle_streaming(const nlohmann::json& inbound, nlohmann::json outbound_request,
                          httplib::Response& res)
    {
        std::string client_model = inbound.value("model", config.model_id);
        std::string host = upstream_host;
        std::string prefix = upstream_prefix;
        const ToolMapping& mapping_ref = mapping;
        const PathPolicy& policy_ref = policy;

        res.set_chunked_content_provider(
            "text/event-stream",
            [host, prefix, outbound_request, client_model, &mapping_ref, &policy_ref](
                std::size_t, httplib::DataSink& sink) {
                StreamBridge bridge(mapping_ref, policy_ref, client_model);
                auto deliver = [&sink](const std::vector<SseEvent>& events) {
                    for (const SseEvent& event : events) {
                        std::string frame = "event: " + event.event + "\n"
                            + "data: " + event.data.dump() + "\n\n";
                        sink.write(frame.data(), frame.size());
                    }
                };

                httplib::Client client(host);
                client.set_read_timeout(std::chrono::seconds(300));
                httplib::Request upstream_request;
                upstream_request.method = "POST";
                upstream_request.path = prefix + "/chat/completions";
                upstream_request.set_header("Content-Type", "application/json");
                upstream_request.body = outbound_request.dump();
                upstream_request.content_receiver =
                    [&bridge, &deliver](const char* data, std::size_t length, std::uint64_t,
                                        std::uint64_t) {
                        deliver(bridge.feed(std::string_view(data, length)));
                        return true;
                    };
                auto result = client.send(upstream_request);
                if (!result || result->status != 200)
                    deliver(bridge.fail(result ? "upstream status "
                                            + std::to_string(result->status)
                                               : "upstream connection failed"));
                else
                    deliver(bridge.finish()); // no-op when [DONE] already closed it
                sink.done();
                return true;
            });
    }
};

ProxyServer::ProxyServer(ProxyConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

ProxyServer::~ProxyServer()
{
    stop();
}

int ProxyServer::start()
{
    if (impl_->config.listen_port == 0) {
        impl_->port = impl_->server.bind_to_any_port(impl_->config.listen_host);
    } else {
        if (!impl_->server.bind_to_port(impl_->config.listen_host, impl_->config.listen_port))
            throw std::runtime_error("cannot bind " + impl_->config.listen_host + ":"
                                     + std::to_string(impl_->config.listen_port));
        impl_->port = impl_->config.listen_port;
    }
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return impl_->port;
}

void ProxyServer::stop()
{
    if (impl_ && impl_->server.is_running())
        impl_->server.stop();
    if (impl_ && impl_->thread.joinable())
        impl_->thread.join();
}

} // namespace trajkit::proxy
