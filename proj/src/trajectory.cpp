// Copyright 2026 the trajkit authors
// SPDX-License-Identifier: Apache-2.0

#include "trajkit/trajectory.hpp"

#include <fstream>

namespace trajkit::trajectory {

std::string_view role_name(Role role)
{
    switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
    case Role::Tool: return "tool";
    }
    return "user";
}

Role role_from_name(std::string_view name)
{
    if (name == "system") return Role::System;
    if (name == "user") return Role::User;
    if (name == "assistant") return Role::Assistant;
    if (name == "tool") return Role::Tool;
    throw std::invalid_argument("unknown step role: " + std::string(name));
}

std::string_view stage_name(RolloutStage stage)
{
    return stage == RolloutStage::First ? "first" : "second";
}

RolloutStage stage_from_name(std::string_view name)
{
    if (name == "first") return RolloutStage::First;
    if (name == "second") return RolloutStage::Second;
    throw std::invalid_argument("unknown rollout stage: " + std::string(name));
}

TokenCounter default_token_counter()
{
    return TokenCounter{"bytes/4", [](std::string_view text) -> std::size_t {
                            return (text.size() + 3) / 4;
                        }};
}

std::size_t step_tokens(const Step& step, const TokenCounter& counter)
{
    std::size_t total = counter.count(step.reasoning) + counter.count(step.content)
        + counter.count(step.tool_result);
    for (const ToolCall& call : step.tool_calls) {
        nlohmann::json serialized{{"name", call.name}, {"arguments", call.arguments}};
        total += counter.count(serialized.dump());
    }
    return total;
}

std::size_t trajectory_tokens(const Trajectory& t, const TokenCounter& counter)
{
    std::size_t total = 0;
    for (const Step& step : t.steps)
        total += step_tokens(step, counter);
    return total;
}

namespace {

std::size_t fitting_prefix_length(const Trajectory& t, std::size_t limit, const TokenCounter& counter)
{
    std::size_t cumulative = 0;
    std::size_t fitting = 0;
    for (const Step& step : t.steps) {
        cumulative += step_tokens(step, counter);
        if (cumulative > limit)
            break;
        ++fitting;
    }
    return fitting;
}

} // namespace

double truncation_ratio(const Trajectory& t, std::size_t limit, const TokenCounter& counter)
{
    if (t.steps.empty())
        throw std::invalid_argument("truncation_ratio: trajectory has no steps");
    return static_cast<double>(fitting_prefix_length(t, limit, counter))
        / static_cast<double>(t.steps.size());
}

Trajectory truncate(const Trajectory& t, std::size_t limit, const TokenCounter& counter)
{
    if (t.steps.empty())
        throw std::invalid_argument("truncate: trajectory has no steps");
    std::size_t keep = fitting_prefix_length(t, limit, counter);
    if (keep == 0)
        throw UntrainableTrajectoryError(t.id);
    Trajectory out = t;
    out.steps.resize(keep);
    out.truncation = TruncationInfo{t.steps.size(),
                                    static_cast<double>(keep) / static_cast<double>(t.steps.size())};
    return out;
}

Trajectory strip_reasoning(const Trajectory& t)
{
    Trajectory out = t;
    for (Step& step : out.steps)
        if (step.role == Role::Assistant)
            step.reasoning.clear();
    return out;
}

double mean_tool_output_tokens(const Trajectory& t, const TokenCounter& counter)
{
    std::size_t total = 0;
    std::size_t tool_steps = 0;
    for (const Step& step : t.steps) {
        if (step.role != Role::Tool)
            continue;
        total += counter.count(step.tool_result);
        ++tool_steps;
    }
    if (tool_steps == 0)
        return 0.0;
    return static_cast<double>(total) / static_cast<double>(tool_steps);
}

nlohmann::json to_json(const Trajectory& t)
{
    nlohmann::json steps = nlohmann::json::array();
    for (const Step& step : t.steps) {
        nlohmann::json s{{"role", role_name(step.role)}, {"content", step.content}};
        if (!step.reasoning.empty())
            s["reasoning"] = step.reasoning;
        if (!step.tool_calls.empty()) {
            nlohmann::json calls = nlohmann::json::array();
            for (const ToolCall& call : step.tool_calls)
                calls.push_back({{"name", call.name}, {"arguments", call.arguments}});
            s["tool_calls"] = std::move(calls);
        }
        if (step.role == Role::Tool)
            s["tool_result"] = step.tool_result;
        steps.push_back(std::move(s));
    }

    nlohmann::json metadata{{"repo", t.metadata.repo},
                            {"commit", t.metadata.commit},
                            {"teacher_id", t.metadata.teacher_id}};
    if (t.metadata.function_ref)
        metadata["function_ref"] = *t.metadata.function_ref;
    if (t.metadata.bug_prompt_id)
        metadata["bug_prompt_id"] = *t.metadata.bug_prompt_id;
    if (t.metadata.synthetic_pr_id)
        metadata["synthetic_pr_id"] = *t.metadata.synthetic_pr_id;

    nlohmann::json j{{"schema_version", kSchemaVersion},
                     {"id", t.id},
                     {"rollout_stage", stage_name(t.rollout_stage)},
                     {"steps", std::move(steps)},
                     {"metadata", std::move(metadata)}};
    if (t.patch)
        j["patch"] = *t.patch;
    if (t.truncation)
        j["truncation"] = {{"original_steps", t.truncation->original_steps},
                           {"ratio", t.truncation->ratio}};
    return j;
}

Trajectory trajectory_from_json(const nlohmann::json& j)
{
    int version = j.value("schema_version", -1);
    if (version != kSchemaVersion)
        throw SchemaVersionError(version);

    Trajectory t;
    t.id = j.at("id").get<std::string>();
    t.rollout_stage = stage_from_name(j.at("rollout_stage").get<std::string>());
    for (const auto& s : j.at("steps")) {
        Step step;
        step.role = role_from_name(s.at("role").get<std::string>());
        step.content = s.value("content", "");
        step.reasoning = s.value("reasoning", "");
        step.tool_result = s.value("tool_result", "");
        if (s.contains("tool_calls"))
            for (const auto& call : s.at("tool_calls"))
                step.tool_calls.push_back(
                    {call.at("name").get<std::string>(), call.value("arguments", nlohmann::json::object())});
        if (step.role != Role::Assistant && (!step.reasoning.empty() || !step.tool_calls.empty()))
            throw std::invalid_argument("trajectory '" + t.id
                                        + "': reasoning/tool_calls on a non-assistant step");
        if (step.role != Role::Tool && !step.tool_result.empty())
            throw std::invalid_argument("trajectory '" + t.id
                                        + "': tool_result on a non-tool step");
        t.steps.push_back(std::move(step));
    }
    if (j.contains("patch"))
        t.patch = j.at("patch").get<std::string>();
    const auto& m = j.at("metadata");
    t.metadata.repo = m.value("repo", "");
    t.metadata.commit = m.value("commit", "");
    t.metadata.teacher_id = m.value("teacher_id", "");
    if (m.contains("function_ref"))
        t.metadata.function_ref = m.at("function_ref").get<std::string>();
    if (m.contains("bug_prompt_id"))
        t.metadata.bug_prompt_id = m.at("bug_prompt_id").get<int>();
    if (m.contains("synthetic_pr_id"))
        t.metadata.synthetic_pr_id = m.at("synthetic_pr_id").get<std::string>();
    if (j.contains("truncation"))
        t.truncation = TruncationInfo{j.at("truncation").at("original_steps").get<std::size_t>(),
                                      j.at("truncation").at("ratio").get<double>()};
    if (t.rollout_stage == RolloutStage::Second && !t.metadata.synthetic_pr_id)
        throw std::invalid_argument("trajectory '" + t.id
                                    + "': second rollouts must record their synthetic_pr_id");
    return t;
}

std::vector<Trajectory> read_trajectories_jsonl(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open trajectory shard: " + path);
    std::vector<Trajectory> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        records.push_back(trajectory_from_json(nlohmann::json::parse(line)));
    }
    return records;
}

void write_trajectories_jsonl(const std::string& path, const std::vector<Trajectory>& records)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write trajectory shard: " + path);
    for (const Trajectory& t : records)
        out << to_json(t).dump() << "\n";
}

} // namespace trajkit::trajectory
