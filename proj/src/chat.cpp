// Copyright 2026 the trajkit authors
// SPDX-License-Identifier: Apache-2.0

#include "trajkit/chat.hpp"

#include <chrono>
#include <fstream>
#include <thread>

#include "httplib.h"

namespace trajkit::chat {

EndpointConfig EndpointConfig::from_json(const nlohmann::json& j)
{
    EndpointConfig config;
    config.base_url = j.value("base_url", "");
    config.model_id = j.value("model_id", "");
    config.max_steps = j.value("max_steps", 115);
    config.request_timeout_s = j.value("request_timeout_s", 60.0);
    if (j.contains("retry")) {
        config.retry.attempts = j.at("retry").value("attempts", 3);
        config.retry.backoff_ms = j.at("retry").value("backoff_ms", 200);
    }
    config.api_key = j.value("api_key", "");
    if (j.contains("headers"))
        for (const auto& [name, value] : j.at("headers").items())
            config.headers.emplace_back(name, value.get<std::string>());
    config.mock_script = j.value("mock_script", "");
    if (config.max_steps < 1)
        throw std::invalid_argument("endpoint.max_steps must be >= 1");
    return config;
}

nlohmann::json to_wire_request(const ChatRequest& request)
{
    nlohmann::json messages = nlohmann::json::array();
    for (const ChatMessage& message : request.messages) {
        nlohmann::json m{{"role", message.role}, {"content", message.content}};
        if (!message.tool_calls.empty()) {
            nlohmann::json calls = nlohmann::json::array();
            for (const ToolCallRequest& call : message.tool_calls)
                calls.push_back({{"id", call.id},
                                 {"type", "function"},
                                 {"function",
                                  {{"name", call.name}, {"arguments", call.arguments.dump()}}}});
            m["tool_calls"] = std::move(calls);
        }
        if (!message.tool_call_id.empty())
            m["tool_call_id"] = message.tool_call_id;
        messages.push_back(std::move(m));
    }

    nlohmann::json j{{"model", request.model}, {"messages", std::move(messages)}};
    if (!request.tools.empty()) {
        nlohmann::json tools = nlohmann::json::array();
        for (const ToolDefinition& tool : request.tools)
            tools.push_back({{"type", "function"},
                             {"function",
                              {{"name", tool.name},
                               {"description", tool.description},
                               {"parameters", tool.parameters}}}});
        j["tools"] = std::move(tools);
    }
    if (request.temperature)
        j["temperature"] = *request.temperature;
    if (request.max_tokens)
        j["max_tokens"] = *request.max_tokens;
    return j;
}

namespace {

nlohmann::json parse_arguments(const nlohmann::json& raw)
{
    if (raw.is_object())
        return raw;
    if (raw.is_string()) {
        auto parsed = nlohmann::json::parse(raw.get<std::string>(), nullptr, false);
        if (!parsed.is_discarded())
            return parsed;
    }
    return nlohmann::json::object();
}

} // namespace

ChatResponse response_from_wire(const nlohmann::json& j)
{
    ChatResponse response;
    if (!j.contains("choices") || j.at("choices").empty())
        throw TransportError("chat response carries no choices: " + j.dump());
    const auto& choice = j.at("choices").at(0);
    const auto& message = choice.at("message");
    if (message.contains("content") && message.at("content").is_string())
        response.content = message.at("content").get<std::string>();
    if (message.contains("reasoning_content") && message.at("reasoning_content").is_string())
        response.reasoning = message.at("reasoning_content").get<std::string>();
    if (message.contains("tool_calls"))
        for (const auto& call : message.at("tool_calls"))
            response.tool_calls.push_back({call.value("id", ""),
                                           call.at("function").at("name").get<std::string>(),
                                           parse_arguments(call.at("function").value("arguments",
                                                                                     nlohmann::json()))});
    response.finish_reason = choice.value("finish_reason", "stop");
    return response;
}

HttpChatEndpoint::HttpChatEndpoint(EndpointConfig config) : config_(std::move(config))
{
    const std::string& url = config_.base_url;
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw std::invalid_argument("endpoint base_url must include a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        scheme_host_ = url;
        path_prefix_ = "";
    } else {
        scheme_host_ = url.substr(0, path_start);
        path_prefix_ = url.substr(path_start);
        while (!path_prefix_.empty() && path_prefix_.back() == '/')
            path_prefix_.pop_back();
    }
}

ChatResponse HttpChatEndpoint::complete(const ChatRequest& request)
{
    const std::string body = to_wire_request(request).dump();
    const std::string path = path_prefix_ + "/chat/completions";

    std::string last_error;
    for (int attempt = 1; attempt <= config_.retry.attempts; ++attempt) {
        httplib::Client client(scheme_host_);
        client.set_connection_timeout(std::chrono::milliseconds(
            static_cast<int>(config_.request_timeout_s * 1000)));
        client.set_read_timeout(std::chrono::milliseconds(
            static_cast<int>(config_.request_timeout_s * 1000)));
        httplib::Headers headers;
        if (!config_.api_key.empty())
            headers.emplace("Authorization", "Bearer " + config_.api_key);
        for (const auto& [name, value] : config_.headers)
            headers.emplace(name, value);

        auto res = client.Post(path, headers, body, "application/json");
        if (res && res->status == 200) {
            auto parsed = nlohmann::json::parse(res->body, nullptr, false);
            if (parsed.is_discarded())
                throw TransportError("endpoint returned unparseable JSON");
            return response_from_wire(parsed);
        }
        if (res && res->status >= 400 && res->status < 500)
            throw TransportError("endpoint rejected request with status "
                                 + std::to_string(res->status) + ": " + res->body);
        last_error = res ? "status " + std::to_string(res->status)
                         : "connection failure (" + httplib::to_string(res.error()) + ")";
        if (attempt < config_.retry.attempts)
            std::this_thread::sleep_for(
                std::chrono::milliseconds(config_.retry.backoff_ms * attempt));
    }
    throw TransportError("endpoint unreachable after " + std::to_string(config_.retry.attempts)
                         + " attempts: " + last_error);
}

ScriptedEndpoint::ScriptedEndpoint(std::vector<MockRule> rules)
    : rules_(std::move(rules)), cursors_(rules_.size(), 0)
{
}

std::shared_ptr<ScriptedEndpoint> ScriptedEndpoint::from_json(const nlohmann::json& j)
{
    std::vector<MockRule> rules;
    for (const auto& r : j.at("rules")) {
        MockRule rule;
        rule.id = r.value("id", "rule-" + std::to_string(rules.size()));
        if (r.at("when_contains").is_string())
            rule.when_contains.push_back(r.at("when_contains").get<std::string>());
        else
            for (const auto& s : r.at("when_contains"))
                rule.when_contains.push_back(s.get<std::string>());
        for (const auto& response : r.at("responses"))
            rule.responses.push_back(response);
        rule.repeat_last = r.value("repeat_last", false);
        rules.push_back(std::move(rule));
    }
    return std::make_shared<ScriptedEndpoint>(std::move(rules));
}

std::shared_ptr<ScriptedEndpoint> ScriptedEndpoint::from_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open mock script: " + path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
}

ChatResponse response_from_script_entry(const nlohmann::json& entry)
{
    if (entry.contains("error"))
        throw TransportError("scripted transport error: " + entry.at("error").get<std::string>());
    ChatResponse response;
    response.content = entry.value("content", "");
    response.reasoning = entry.value("reasoning", "");
    response.finish_reason = entry.value("finish_reason", "stop");
    if (entry.contains("tool_calls")) {
        int index = 0;
        for (const auto& call : entry.at("tool_calls")) {
            response.tool_calls.push_back({"call_" + std::to_string(index++),
                                           call.at("name").get<std::string>(),
                                           call.value("arguments", nlohmann::json::object())});
        }
        if (!response.tool_calls.empty())
            response.finish_reason = entry.value("finish_reason", "tool_calls");
    }
    return response;
}

ChatResponse ScriptedEndpoint::complete(const ChatRequest& request)
{
    std::string haystack;
    for (const ChatMessage& message : request.messages) {
        haystack += message.content;
        haystack += "\n";
        for (const ToolCallRequest& call : message.tool_calls) {
            haystack += call.name;
            haystack += call.arguments.dump();
            haystack += "\n";
        }
    }

    std::lock_guard<std::mutex> lock(mutex_);
    log_.push_back({request.trace_tag, to_wire_request(request)});
    for (std::size_t i = 0; i < rules_.size(); ++i) {
        const MockRule& rule = rules_[i];
        bool matches = true;
        for (const std::string& needle : rule.when_contains)
            if (haystack.find(needle) == std::string::npos) {
                matches = false;
                break;
            }
        if (!matches)
            continue;
        std::size_t cursor = cursors_[i];
        if (cursor >= rule.responses.size()) {
            if (!rule.repeat_last)
                continue; // exhausted; let a later rule take over
            cursor = rule.responses.size() - 1;
        } else {
            ++cursors_[i];
        }
        return response_from_script_entry(rule.responses[cursor]);
    }
    throw TransportError("scripted endpoint: no rule matches request (tag="
                         + request.trace_tag + ")");
}

std::vector<ScriptedEndpoint::LogEntry> ScriptedEndpoint::request_log() const
{
    std::lock_guard<std::mutex> lock(mutex_);
    return log_;
}

} // namespace trajkit::chat
