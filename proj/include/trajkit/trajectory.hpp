// Copyright 2026 the trajkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace trajkit::trajectory {

enum class Role { System, User, Assistant, Tool };

std::string_view role_name(Role role);
Role role_from_name(std::string_view name);

struct ToolCall {
    std::string name;
    nlohmann::json arguments = nlohmann::json::object();

    friend bool operator==(const ToolCall&, const ToolCall&) = default;
};

struct Step {
    Role role = Role::User;
    std::string reasoning;  // assistant steps only
    std::string content;
    std::vector<ToolCall> tool_calls; // assistant steps only
    std::string tool_result;          // tool steps only

    friend bool operator==(const Step&, const Step&) = default;
};

enum class RolloutStage { First, Second };

std::string_view stage_name(RolloutStage stage);
RolloutStage stage_from_name(std::string_view name);

struct TrajectoryMetadata {
    std::string repo;
    std::string commit;
    std::optional<std::string> function_ref;
    std::optional<int> bug_prompt_id;
    std::string teacher_id;
    std::optional<std::string> synthetic_pr_id; // second rollouts record their seed PR

    friend bool operator==(const TrajectoryMetadata&, const TrajectoryMetadata&) = default;
};

struct TruncationInfo {
    std::size_t original_steps = 0;
    double ratio = 1.0;

    friend bool operator==(const TruncationInfo&, const TruncationInfo&) = default;
};

struct Trajectory {
    std::string id;
    RolloutStage rollout_stage = RolloutStage::First;
    std::vector<Step> steps;
    std::optional<std::string> patch; // unified diff text
    TrajectoryMetadata metadata;
    std::optional<TruncationInfo> truncation;

    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Abstract text -> token-count function. count("") must be 0 and counting
/// must be monotone under concatenation.
struct TokenCounter {
    std::string name;
    std::function<std::size_t(std::string_view)> count;
};

/// ceil(UTF-8 bytes / 4); deterministic stand-in for a model tokenizer.
TokenCounter default_token_counter();

std::size_t step_tokens(const Step& step, const TokenCounter& counter);
std::size_t trajectory_tokens(const Trajectory& t, const TokenCounter& counter);

/// k / n where k is the largest whole-step prefix whose cumulative token
/// count fits in `limit` and n is the total step count.
double truncation_ratio(const Trajectory& t, std::size_t limit, const TokenCounter& counter);

class UntrainableTrajectoryError : public std::runtime_error {
public:
    explicit UntrainableTrajectoryError(const std::string& id)
        : std::runtime_error("untrainable trajectory: first step of '" + id
                             + "' alone exceeds the token limit")
    {
    }
};

/// Maximal whole-step prefix fitting in `limit`; records the original step
/// count and ratio. Throws UntrainableTrajectoryError when not even the
/// first step fits.
Trajectory truncate(const Trajectory& t, std::size_t limit, const TokenCounter& counter);

/// Clears assistant reasoning; everything else is untouched.
Trajectory strip_reasoning(const Trajectory& t);

/// Mean token count over tool_result fields; 0 when there are no tool steps.
double mean_tool_output_tokens(const Trajectory& t, const TokenCounter& counter);

// --- JSONL persistence (one object per line, schema_version field) ---

inline constexpr int kSchemaVersion = 1;

nlohmann::json to_json(const Trajectory& t);
Trajectory trajectory_from_json(const nlohmann::json& j);

class SchemaVersionError : public std::runtime_error {
public:
    explicit SchemaVersionError(int found)
        : std::runtime_error("unsupported schema_version " + std::to_string(found) + " (expected "
                             + std::to_string(kSchemaVersion) + ")")
    {
    }
};

std::vector<Trajectory> read_trajectories_jsonl(const std::string& path);
void write_trajectories_jsonl(const std::string& path, const std::vector<Trajectory>& records);

} // namespace trajkit::trajectory
