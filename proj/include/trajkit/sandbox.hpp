// Copyright 2026 the trajkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "trajkit/chat.hpp"

namespace trajkit::sandbox {

struct ShellPolicy {
    bool enabled = false;
    std::vector<std::string> allowlist; // permitted first tokens
};

/// Private checkout of a codebase under a temp directory. Tool errors are
/// returned as result text so the agent can react to them; only setup
/// problems throw.
class Workspace {
public:
    explicit Workspace(const std::filesystem::path& source_root);
    ~Workspace();

    Workspace(const Workspace&) = delete;
    Workspace& operator=(const Workspace&) = delete;

    std::string view(const std::string& path,
                     std::optional<std::pair<long, long>> range = std::nullopt) const;
    std::string edit(const std::string& path, const std::string& old_str,
                     const std::string& new_str);
    std::string shell(const std::string& command, const ShellPolicy& policy) const;

    /// Unified diff of every modified file against the pristine source,
    /// ordered by path.
    std::string diff() const;

    const std::filesystem::path& root() const { return work_root_; }

private:
    std::filesystem::path source_root_;
    std::filesystem::path work_root_;

    std::optional<std::filesystem::path> resolve(const std::string& path) const;
};

/// The scaffold's tool surface: view, edit, submit, shell.
std::vector<chat::ToolDefinition> scaffold_tool_definitions(bool shell_enabled);

/// Dispatches one tool call against the workspace; "submit" is handled by
/// the agent loop, not here.
std::string execute_tool(Workspace& workspace, const chat::ToolCallRequest& call,
                         const ShellPolicy& policy);

} // namespace trajkit::sandbox
