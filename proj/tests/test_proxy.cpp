// Copyright 2026 the trajkit authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <thread>

#include "httplib.h"

#include "trajkit/proxy.hpp"

using namespace trajkit::proxy;
using nlohmann::json;

namespace {

PathPolicy policy()
{
    return {"/workspace/repo", "/home/dev/project"};
}

json read_tool_request()
{
    return json::parse(R"json({
      "model": "client-model",
      "max_tokens": 512,
      "temperature": 0.2,
      "stop_sequences": ["<END>"],
      "system": "You work in /home/dev/project today.",
      "messages": [
        {"role": "user", "content": "Open /home/dev/project/src/a.py and fix the bug."},
        {"role": "assistant", "content": [
          {"type": "text", "text": "Reading the file."},
          {"type": "tool_use", "id": "toolu_1", "name": "Read",
           "input": {"file_path": "/home/dev/project/src/a.py"}}
        ]},
        {"role": "user", "content": [
          {"type": "tool_result", "tool_use_id": "toolu_1", "content": "1\tprint('/home/dev/project')"}
        ]}
      ],
      "tools": [
        {"name": "Read", "description": "read", "input_schema": {"type": "object"}},
        {"name": "Edit", "description": "edit", "input_schema": {"type": "object"}},
        {"name": "Write", "description": "write", "input_schema": {"type": "object"}},
        {"name": "Bash", "description": "bash", "input_schema": {"type": "object"}}
      ]
    })json");
}

} // namespace

TEST_CASE("tool mapping is a bijection over the four client tools")
{
    ToolMapping mapping = ToolMapping::defaults();
    struct Case {
        const char* client;
        json input;
    };
    const Case cases[] = {
        {"Read", {{"file_path", "/x/a.py"}}},
        {"Edit", {{"file_path", "/x/a.py"}, {"old_string", "a"}, {"new_string", "b"}}},
        {"Write", {{"file_path", "/x/a.py"}, {"content", "body"}}},
        {"Bash", {{"command", "ls -la"}}},
    };
    for (const Case& c : cases) {
        auto [scaffold, arguments] = mapping.map_call(c.client, c.input);
        auto [client, input] = mapping.unmap_call(scaffold, arguments);
        CHECK(client == c.client);
        CHECK(input == c.input);
    }

    auto [scaffold, arguments] = mapping.map_call("Edit", cases[1].input);
    CHECK(scaffold == "str_replace_editor");
    CHECK(arguments.at("command") == "str_replace");
    CHECK(arguments.at("path") == "/x/a.py");
    CHECK(arguments.at("old_str") == "a");
    CHECK_FALSE(arguments.contains("file_path"));

    CHECK_THROWS_AS(mapping.map_call("Grep", json::object()), UnmappableToolCall);
    CHECK_THROWS_AS(mapping.unmap_call("str_replace_editor", {{"command", "undo_edit"}}),
                    UnmappableToolCall);
    CHECK_THROWS_AS(mapping.unmap_call("python", json::object()), UnmappableToolCall);

    SUBCASE("bundled mapping file matches the built-in defaults")
    {
        ToolMapping from_file = ToolMapping::from_file(std::string(TRAJKIT_DATA_DIR)
                                                       + "/tool_mapping.json");
        for (const Case& c : cases) {
            auto built_in = mapping.map_call(c.client, c.input);
            auto loaded = from_file.map_call(c.client, c.input);
            CHECK(built_in == loaded);
        }
    }
}

TEST_CASE("path policy")
{
    PathPolicy p = policy();
    p.validate();

    SUBCASE("rewrite and inverse rewrite are identity on paths under either root")
    {
        for (std::string path : {"/home/dev/project", "/home/dev/project/src/a.py",
                                 "see /home/dev/project/x and /home/dev/project/y",
                                 "quoted \"/home/dev/project/z\""}) {
            std::string canonical = p.to_canonical(path);
            CHECK(p.to_user(canonical) == path);
        }
        for (std::string path : {"/workspace/repo/deep/file.c", "/workspace/repo"}) {
            std::string user = p.to_user(path);
            CHECK(p.to_canonical(user) == path);
        }
    }
    SUBCASE("sibling directories sharing the prefix stay untouched")
    {
        CHECK(p.to_canonical("/home/dev/project2/f") == "/home/dev/project2/f");
        CHECK(p.to_canonical("/home/dev/projectile") == "/home/dev/projectile");
        CHECK(p.to_user("/workspace/repository") == "/workspace/repository");
    }
    SUBCASE("validation rejects relative and nested roots")
    {
        CHECK_THROWS_AS((PathPolicy{"workspace", "/a"}).validate(), std::invalid_argument);
        CHECK_THROWS_AS((PathPolicy{"/a", ""}).validate(), std::invalid_argument);
        CHECK_THROWS_AS((PathPolicy{"/a", "/a/b"}).validate(), std::invalid_argument);
        CHECK_THROWS_AS((PathPolicy{"/a/b", "/a"}).validate(), std::invalid_argument);
        PathPolicy same{"/a", "/a"};
        same.validate();
        CHECK(same.to_canonical("/a/x") == "/a/x");
    }
}

TEST_CASE("translate_request")
{
    ToolMapping mapping = ToolMapping::defaults();
    PathPolicy p = policy();

    SUBCASE("plain chat is a field-renamed passthrough")
    {
        json inbound{{"model", "client-model"},
                     {"max_tokens", 64},
                     {"messages", json::array({{{"role", "user"}, {"content", "just chat"}}})}};
        json outbound = translate_request(inbound, mapping, p, "upstream-model");
        CHECK(outbound.at("model") == "upstream-model");
        CHECK(outbound.at("max_tokens") == 64);
        REQUIRE(outbound.at("messages").size() == 1);
        CHECK(outbound.at("messages")[0].at("content") == "just chat");
        CHECK_FALSE(outbound.contains("tools"));
    }
    SUBCASE("tool definitions are replaced by scaffold definitions")
    {
        json outbound = translate_request(read_tool_request(), mapping, p, "upstream-model");
        REQUIRE(outbound.contains("tools"));
        std::vector<std::string> names;
        for (const auto& tool : outbound.at("tools"))
            names.push_back(tool.at("function").at("name").get<std::string>());
        CHECK(names == std::vector<std::string>{"str_replace_editor", "bash"});
    }
    SUBCASE("paths, tool calls and tool results convert")
    {
        json outbound = translate_request(read_tool_request(), mapping, p, "upstream-model");
        const auto& messages = outbound.at("messages");
        REQUIRE(messages.size() == 4); // system, user, assistant, tool
        CHECK(messages[0].at("role") == "system");
        CHECK(messages[0].at("content") == "You work in /workspace/repo today.");
        CHECK(messages[1].at("content") == "Open /workspace/repo/src/a.py and fix the bug.");
        CHECK(messages[2].at("role") == "assistant");
        REQUIRE(messages[2].contains("tool_calls"));
        const auto& call = messages[2].at("tool_calls")[0];
        CHECK(call.at("id") == "toolu_1");
        CHECK(call.at("function").at("name") == "str_replace_editor");
        json arguments = json::parse(call.at("function").at("arguments").get<std::string>());
        CHECK(arguments.at("command") == "view");
        CHECK(arguments.at("path") == "/workspace/repo/src/a.py");
        CHECK(messages[3].at("role") == "tool");
        CHECK(messages[3].at("tool_call_id") == "toolu_1");
        CHECK(messages[3].at("content") == "1\tprint('/workspace/repo')");
        CHECK(outbound.at("stop") == json::array({"<END>"}));
    }
    SUBCASE("unknown tool names are a 400 listing the known tools")
    {
        json inbound = read_tool_request();
        inbound["tools"].push_back({{"name", "Glob"}, {"input_schema", json::object()}});
        try {
            translate_request(inbound, mapping, p, "m");
            FAIL("expected TranslationError");
        } catch (const TranslationError& e) {
            CHECK(e.status() == 400);
            CHECK(std::string(e.what()).find("Glob") != std::string::npos);
            CHECK(std::string(e.what()).find("Read") != std::string::npos);
        }
    }
    SUBCASE("malformed bodies are a 400 with a schema pointer")
    {
        try {
            translate_request(json{{"model", "x"}}, mapping, p, "m");
            FAIL("expected TranslationError");
        } catch (const TranslationError& e) {
            CHECK(e.status() == 400);
            CHECK(e.pointer() == "/messages");
        }
    }
}

TEST_CASE("translate_response")
{
    ToolMapping mapping = ToolMapping::defaults();
    PathPolicy p = policy();

    SUBCASE("plain text replies pass through with paths rewritten")
    {
        json outbound{{"id", "chatcmpl-9"},
                      {"choices",
                       json::array({{{"message",
                                      {{"role", "assistant"},
                                       {"content", "Edited /workspace/repo/src/a.py."}}},
                                     {"finish_reason", "stop"}}})},
                      {"usage", {{"prompt_tokens", 11}, {"completion_tokens", 3}}}};
        json reply = translate_response(outbound, mapping, p, "client-model");
        CHECK(reply.at("model") == "client-model");
        CHECK(reply.at("stop_reason") == "end_turn");
        REQUIRE(reply.at("content").size() == 1);
        CHECK(reply.at("content")[0].at("text") == "Edited /home/dev/project/src/a.py.");
        CHECK(reply.at("usage").at("input_tokens") == 11);
    }
    SUBCASE("scaffold tool calls map back to client tools")
    {
        json outbound{{"choices",
                       json::array(
                           {{{"message",
                              {{"role", "assistant"},
                               {"content", nullptr},
                               {"tool_calls",
                                json::array(
                                    {{{"id", "call_7"},
                                      {"type", "function"},
                                      {"function",
                                       {{"name", "str_replace_editor"},
                                        {"arguments",
                                         "{\"command\":\"view\",\"path\":\"/workspace/repo/b.py\"}"}}}}})}}},
                             {"finish_reason", "tool_calls"}}})}};
        json reply = translate_response(outbound, mapping, p, "client-model");
        CHECK(reply.at("stop_reason") == "tool_use");
        REQUIRE(reply.at("content").size() == 1);
        const auto& block = reply.at("content")[0];
        CHECK(block.at("type") == "tool_use");
        CHECK(block.at("id") == "call_7");
        CHECK(block.at("name") == "Read");
        CHECK(block.at("input").at("file_path") == "/home/dev/project/b.py");
    }
    SUBCASE("unmappable tool calls become error blocks without dropping the reply")
    {
        json outbound{{"choices",
                       json::array(
                           {{{"message",
                              {{"role", "assistant"},
                               {"content", "partial"},
                               {"tool_calls",
                                json::array({{{"id", "call_8"},
                                              {"type", "function"},
                                              {"function",
                                               {{"name", "python"},
                                                {"arguments", "{}"}}}}})}}},
                             {"finish_reason", "tool_calls"}}})}};
        json reply = translate_response(outbound, mapping, p, "client-model");
        REQUIRE(reply.at("content").size() == 2);
        CHECK(reply.at("content")[0].at("text") == "partial");
        CHECK(reply.at("content")[1].at("type") == "text");
        CHECK(std::string(reply.at("content")[1].at("text")).find("unmappable")
              != std::string::npos);
    }
}

TEST_CASE("streaming rewriter holds back only partial matches")
{
    StreamingRewriter rewriter("/workspace/repo", "/home/dev/project");
    std::string out;
    out += rewriter.feed("patch applied in /works");
    CHECK(out == "patch applied in ");
    out += rewriter.feed("pace/repo/src/");
    out += rewriter.feed("a.py done");
    out += rewriter.finish();
    CHECK(out == "patch applied in /home/dev/project/src/a.py done");

    SUBCASE("match at end of stream")
    {
        StreamingRewriter r2("/workspace/repo", "/u");
        std::string text = r2.feed("root is /workspace/repo");
        CHECK(text == "root is "); // boundary unknown yet
        CHECK(r2.finish() == "/u");
    }
    SUBCASE("prefix that never completes flushes on finish")
    {
        StreamingRewriter r3("/workspace/repo", "/u");
        std::string text = r3.feed("see /workspace/re");
        CHECK(text == "see ");
        CHECK(r3.finish() == "/workspace/re");
    }
    SUBCASE("sibling path is not rewritten")
    {
        StreamingRewriter r4("/workspace/repo", "/u");
        std::string text = r4.feed("/workspace/repository");
        text += r4.finish();
        CHECK(text == "/workspace/repository");
    }
}

namespace {

std::string openai_sse_chunk(const json& payload)
{
    return "data: " + payload.dump() + "\n\n";
}

json delta_chunk(const std::string& text)
{
    return {{"id", "chatcmpl-s"},
            {"choices", json::array({{{"index", 0}, {"delta", {{"content", text}}}}})}};
}

} // namespace

TEST_CASE("stream bridge")
{
    ToolMapping mapping = ToolMapping::defaults();
    PathPolicy p = policy();

    SUBCASE("three text deltas arrive in order as three events")
    {
        StreamBridge bridge(mapping, p, "client-model");
        std::vector<SseEvent> events = bridge.feed(openai_sse_chunk(delta_chunk("one ")));
        auto more = bridge.feed(openai_sse_chunk(delta_chunk("two ")));
        events.insert(events.end(), more.begin(), more.end());
        more = bridge.feed(openai_sse_chunk(delta_chunk("three")));
        events.insert(events.end(), more.begin(), more.end());
        more = bridge.feed("data: [DONE]\n\n");
        events.insert(events.end(), more.begin(), more.end());

        std::vector<std::string> names;
        std::string text;
        for (const auto& event : events) {
            names.push_back(event.event);
            if (event.event == "content_block_delta"
                && event.data.at("delta").at("type") == "text_delta")
                text += event.data.at("delta").at("text").get<std::string>();
        }
        CHECK(names == std::vector<std::string>{"message_start", "content_block_start",
                                                "content_block_delta", "content_block_delta",
                                                "content_block_delta", "content_block_stop",
                                                "message_delta", "message_stop"});
        CHECK(text == "one two three");
    }
    SUBCASE("tool call split across deltas is assembled then mapped once")
    {
        StreamBridge bridge(mapping, p, "client-model");
        json part1{{"choices",
                    json::array({{{"index", 0},
                                  {"delta",
                                   {{"tool_calls",
                                     json::array({{{"index", 0},
                                                   {"id", "call_1"},
                                                   {"function",
                                                    {{"name", "str_replace_editor"},
                                                     {"arguments", "{\"command\":\"view\","}}}}})}}}}})}};
        json part2{{"choices",
                    json::array({{{"index", 0},
                                  {"delta",
                                   {{"tool_calls",
                                     json::array({{{"index", 0},
                                                   {"function",
                                                    {{"arguments",
                                                      "\"path\":\"/workspace/repo/c.py\"}"}}}}})}}}}})}};
        json finish{{"choices",
                     json::array({{{"index", 0},
                                   {"delta", json::object()},
                                   {"finish_reason", "tool_calls"}}})}};
        std::vector<SseEvent> events = bridge.feed(openai_sse_chunk(part1));
        for (const auto& chunk : {part2, finish}) {
            auto more = bridge.feed(openai_sse_chunk(chunk));
            events.insert(events.end(), more.begin(), more.end());
        }
        auto more = bridge.feed("data: [DONE]\n\n");
        events.insert(events.end(), more.begin(), more.end());

        int tool_blocks = 0;
        for (const auto& event : events) {
            if (event.event == "content_block_start"
                && event.data.at("content_block").at("type") == "tool_use") {
                ++tool_blocks;
                CHECK(event.data.at("content_block").at("name") == "Read");
            }
            if (event.event == "content_block_delta"
                && event.data.at("delta").at("type") == "input_json_delta") {
                json input = json::parse(
                    event.data.at("delta").at("partial_json").get<std::string>());
                CHECK(input.at("file_path") == "/home/dev/project/c.py");
            }
            if (event.event == "message_delta")
                CHECK(event.data.at("delta").at("stop_reason") == "tool_use");
        }
        CHECK(tool_blocks == 1);
    }
    SUBCASE("upstream failure mid-stream emits an error event after delivered deltas")
    {
        StreamBridge bridge(mapping, p, "client-model");
        auto events = bridge.feed(openai_sse_chunk(delta_chunk("partial text")));
        auto failure = bridge.fail("connection reset");
        events.insert(events.end(), failure.begin(), failure.end());
        REQUIRE(!events.empty());
        CHECK(events.back().event == "error");
        bool saw_text = false;
        for (const auto& event : events)
            if (event.event == "content_block_delta")
                saw_text = true;
        CHECK(saw_text);
        CHECK(bridge.finish().empty()); // already terminated
    }
}

TEST_CASE("proxy server end to end over http")
{
    // Upstream chat-completions mock.
    httplib::Server upstream;
    json last_upstream_request;
    upstream.Post("/v1/chat/completions",
                  [&last_upstream_request](const httplib::Request& req, httplib::Response& res) {
                      last_upstream_request = json::parse(req.body);
                      if (last_upstream_request.value("stream", false)) {
                          std::string body;
                          body += "data: " + delta_chunk("streamed /workspace/repo/out.txt").dump()
                              + "\n\n";
                          body += "data: " + delta_chunk(" tail").dump() + "\n\n";
                          body += "data: [DONE]\n\n";
                          res.set_content(body, "text/event-stream");
                          return;
                      }
                      json reply{
                          {"id", "chatcmpl-e2e"},
                          {"choices",
                           json::array(
                               {{{"message",
                                  {{"role", "assistant"},
                                   {"content", "ok: /workspace/repo/readme.md"}}},
                                 {"finish_reason", "stop"}}})},
                          {"usage", {{"prompt_tokens", 5}, {"completion_tokens", 2}}}};
                      res.set_content(reply.dump(), "application/json");
                  });
    upstream.Get("/v1/models", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"data":[]})", "application/json");
    });
    int upstream_port = upstream.bind_to_any_port("127.0.0.1");
    std::thread upstream_thread([&upstream] { upstream.listen_after_bind(); });
    upstream.wait_until_ready();

    ProxyConfig config;
    config.upstream_base_url = "http://127.0.0.1:" + std::to_string(upstream_port) + "/v1";
    config.model_id = "upstream-model";
    config.canonical_root = "/workspace/repo";
    config.user_root = "/home/dev/project";
    ProxyServer proxy(config);
    int port = proxy.start();

    httplib::Client client("http://127.0.0.1:" + std::to_string(port));

    SUBCASE("health endpoint reports the upstream reachable")
    {
        auto res = client.Get("/health");
        REQUIRE(res);
        json health = json::parse(res->body);
        CHECK(health.at("status") == "ok");
        CHECK(health.at("upstream") == "reachable");
    }
    SUBCASE("unary request round-trips with tool and path translation")
    {
        auto res = client.Post("/v1/messages", read_tool_request().dump(), "application/json");
        REQUIRE(res);
        REQUIRE(res->status == 200);
        json reply = json::parse(res->body);
        CHECK(reply.at("type") == "message");
        CHECK(reply.at("content")[0].at("text") == "ok: /home/dev/project/readme.md");
        // The upstream saw scaffold names and canonical paths.
        std::string upstream_dump = last_upstream_request.dump();
        CHECK(upstream_dump.find("str_replace_editor") != std::string::npos);
        CHECK(upstream_dump.find("/workspace/repo/src/a.py") != std::string::npos);
        CHECK(upstream_dump.find("\"Read\"") == std::string::npos);
        CHECK(upstream_dump.find("/home/dev/project") == std::string::npos);
    }
    SUBCASE("malformed body yields a 400")
    {
        auto res = client.Post("/v1/messages", "{not json", "application/json");
        REQUIRE(res);
        CHECK(res->status == 400);
    }
    SUBCASE("streaming requests deliver SSE events in order")
    {
        json inbound{{"model", "client-model"},
                     {"stream", true},
                     {"max_tokens", 32},
                     {"messages", json::array({{{"role", "user"}, {"content", "go"}}})}};
        std::string stream_body;
        httplib::Request request;
        request.method = "POST";
        request.path = "/v1/messages";
        request.set_header("Content-Type", "application/json");
        request.body = inbound.dump();
        request.content_receiver = [&stream_body](const char* data, std::size_t length,
                                                  std::uint64_t, std::uint64_t) {
            stream_body.append(data, length);
            return true;
        };
        auto res = client.send(request);
        REQUIRE(res);
        CHECK(res->status == 200);
        CHECK(stream_body.find("event: message_start") != std::string::npos);
        CHECK(stream_body.find("streamed /home/dev/project/out.txt") != std::string::npos);
        CHECK(stream_body.find("event: message_stop") != std::string::npos);
        CHECK(stream_body.find("/workspace/repo") == std::string::npos);
        CHECK(stream_body.find("event: message_start")
              < stream_body.find("event: content_block_delta"));
        CHECK(stream_body.find("event: content_block_delta")
              < stream_body.find("event: message_stop"));
    }

    proxy.stop();
    upstream.stop();
    upstream_thread.join();
}

TEST_CASE("tool_choice translates by name")
{
    ToolMapping mapping = ToolMapping::defaults();
    PathPolicy p = policy();
    json inbound{{"model", "m"},
                 {"messages", json::array({{{"role", "user"}, {"content", "x"}}})},
                 {"tool_choice", {{"type", "tool"}, {"name", "Edit"}}}};
    json outbound = translate_request(inbound, mapping, p, "up");
    CHECK(outbound.at("tool_choice").at("function").at("name") == "str_replace_editor");

    inbound["tool_choice"] = {{"type", "any"}};
    CHECK(translate_request(inbound, mapping, p, "up").at("tool_choice") == "required");

    inbound["tool_choice"] = {{"type", "tool"}, {"name", "Nope"}};
    CHECK_THROWS_AS(translate_request(inbound, mapping, p, "up"), TranslationError);
}

TEST_CASE("health endpoint reports an unreachable upstream")
{
    ProxyConfig config;
    config.upstream_base_url = "http://127.0.0.1:9/v1"; // discard port: nothing listens
    config.model_id = "m";
    config.canonical_root = "/workspace/repo";
    config.user_root = "/home/dev/project";
    ProxyServer proxy(config);
    int port = proxy.start();
    httplib::Client client("http://127.0.0.1:" + std::to_string(port));
    auto res = client.Get("/health");
    REQUIRE(res);
    CHECK(json::parse(res->body).at("upstream") == "unreachable");
    proxy.stop();
}
