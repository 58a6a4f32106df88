// Copyright 2026 the trajkit authors
// SPDX-License-Identifier: Apache-2.0

#include "trajkit/sandbox.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <unistd.h>

#include "trajkit/patchdiff.hpp"

namespace fs = std::filesystem;

namespace trajkit::sandbox {

namespace {

std::atomic<std::uint64_t> g_workspace_counter{0};

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::vector<std::string> relative_files(const fs::path& root)
{
    std::vector<std::string> files;
    if (!fs::exists(root))
        return files;
    for (const auto& entry : fs::recursive_directory_iterator(root))
        if (entry.is_regular_file())
            files.push_back(fs::relative(entry.path(), root).generic_string());
    std::sort(files.begin(), files.end());
    return files;
}

} // namespace

Workspace::Workspace(const fs::path& source_root) : source_root_(source_root)
{
    if (!fs::is_directory(source_root_))
        throw std::runtime_error("codebase root is not a readable directory: "
                                 + source_root_.string());
    work_root_ = fs::temp_directory_path()
        / ("trajkit-ws-" + std::to_string(::getpid()) + "-"
           + std::to_string(g_workspace_counter.fetch_add(1)));
    fs::create_directories(work_root_);
    fs::copy(source_root_, work_root_,
             fs::copy_options::recursive | fs::copy_options::copy_symlinks);
}

Workspace::~Workspace()
{
    std::error_code ec;
    fs::remove_all(work_root_, ec);
}

std::optional<fs::path> Workspace::resolve(const std::string& path) const
{
    fs::path candidate(path);
    if (candidate.is_absolute())
        return std::nullopt;
    for (const auto& part : candidate)
        if (part == "..")
            return std::nullopt;
    return work_root_ / candidate;
}

std::string Workspace::view(const std::string& path,
                            std::optional<std::pair<long, long>> range) const
{
    auto resolved = resolve(path.empty() ? "." : path);
    if (!resolved)
        return "ERROR: path escapes the workspace: " + path;
    if (fs::is_directory(*resolved)) {
        std::vector<std::string> entries;
        for (const auto& entry : fs::directory_iterator(*resolved)) {
            std::string name = entry.path().filename().string();
            if (entry.is_directory())
                name += "/";
            entries.push_back(std::move(name));
        }
        std::sort(entries.begin(), entries.end());
        std::ostringstream out;
        out << (path.empty() ? "." : path) << ":\n";
        for (const std::string& entry : entries)
            out << entry << "\n";
        return out.str();
    }
    if (!fs::is_regular_file(*resolved))
        return "ERROR: no such file: " + path;

    std::ifstream in(*resolved);
    std::ostringstream out;
    std::string line;
    long number = 0;
    long first = range ? range->first : 1;
    long last = range ? range->second : std::numeric_limits<long>::max();
    while (std::getline(in, line)) {
        ++number;
        if (number < first)
            continue;
        if (number > last)
            break;
        char prefix[16];
        std::snprintf(prefix, sizeof prefix, "%6ld\t", number);
        out << prefix << line << "\n";
    }
    return out.str();
}

std::string Workspace::edit(const std::string& path, const std::string& old_str,
                            const std::string& new_str)
{
    auto resolved = resolve(path);
    if (!resolved)
        return "ERROR: path escapes the workspace: " + path;
    if (!fs::is_regular_file(*resolved))
        return "ERROR: no such file: " + path;
    if (old_str.empty())
        return "ERROR: old_str must be non-empty";

    std::string body = read_file(*resolved);
    std::size_t first = body.find(old_str);
    if (first == std::string::npos)
        return "ERROR: old_str not found in " + path;
    if (body.find(old_str, first + 1) != std::string::npos)
        return "ERROR: old_str matches more than once in " + path + "; provide a unique string";

    body.replace(first, old_str.size(), new_str);
    std::ofstream out(*resolved, std::ios::binary | std::ios::trunc);
    out << body;
    return "OK: replaced one occurrence in " + path;
}

std::string Workspace::shell(const std::string& command, const ShellPolicy& policy) const
{
    if (!policy.enabled)
        return "ERROR: shell tool is disabled";
    std::istringstream tokens(command);
    std::string head;
    tokens >> head;
    if (std::find(policy.allowlist.begin(), policy.allowlist.end(), head)
        == policy.allowlist.end())
        return "ERROR: command '" + head + "' is not on the shell allowlist";

    std::string wrapped = "cd '" + work_root_.string() + "' && (" + command + ") 2>&1";
    FILE* pipe = ::popen(wrapped.c_str(), "r");
    if (!pipe)
        return "ERROR: failed to start shell";
    std::string output;
    char buffer[4096];
    while (std::size_t n = std::fread(buffer, 1, sizeof buffer, pipe)) {
        output.append(buffer, n);
        if (output.size() > 1 << 20) {
            output += "\n[output truncated]";
            break;
        }
    }
    ::pclose(pipe);
    return output;
}

std::string Workspace::diff() const
{
    std::vector<std::string> files = relative_files(source_root_);
    for (const std::string& file : relative_files(work_root_))
        if (!std::binary_search(files.begin(), files.end(), file))
            files.push_back(file);
    std::sort(files.begin(), files.end());
    files.erase(std::unique(files.begin(), files.end()), files.end());

    std::string out;
    for (const std::string& file : files) {
        fs::path old_path = source_root_ / file;
        fs::path new_path = work_root_ / file;
        std::string old_body = fs::is_regular_file(old_path) ? read_file(old_path) : "";
        std::string new_body = fs::is_regular_file(new_path) ? read_file(new_path) : "";
        if (old_body != new_body)
            out += patchdiff::make_unified_diff(old_body, new_body, file);
    }
    return out;
}

std::vector<chat::ToolDefinition> scaffold_tool_definitions(bool shell_enabled)
{
    using nlohmann::json;
    std::vector<chat::ToolDefinition> tools;
    tools.push_back({"view",
                     "View a file with line numbers (optionally a line range) or list a directory.",
                     json{{"type", "object"},
                          {"properties",
                           {{"path", {{"type", "string"}}},
                            {"start_line", {{"type", "integer"}}},
                            {"end_line", {{"type", "integer"}}}}},
                          {"required", json::array({"path"})}}});
    tools.push_back({"edit",
                     "Replace an exact, unique occurrence of old_str with new_str in a file.",
                     json{{"type", "object"},
                          {"properties",
                           {{"path", {{"type", "string"}}},
                            {"old_str", {{"type", "string"}}},
                            {"new_str", {{"type", "string"}}}}},
                          {"required", json::array({"path", "old_str", "new_str"})}}});
    tools.push_back({"submit", "Finalize the change and emit the project diff.",
                     json{{"type", "object"}, {"properties", json::object()}}});
    if (shell_enabled)
        tools.push_back({"shell", "Run an allow-listed shell command in the workspace.",
                         json{{"type", "object"},
                              {"properties", {{"command", {{"type", "string"}}}}},
                              {"required", json::array({"command"})}}});
    return tools;
}

std::string execute_tool(Workspace& workspace, const chat::ToolCallRequest& call,
                         const ShellPolicy& policy)
{
    const nlohmann::json& args = call.arguments;
    if (call.name == "view") {
        std::optional<std::pair<long, long>> range;
        if (args.contains("start_line"))
            range = {args.value("start_line", 1L),
                     args.value("end_line", std::numeric_limits<long>::max())};
        return workspace.view(args.value("path", ""), range);
    }
    if (call.name == "edit")
        return workspace.edit(args.value("path", ""), args.value("old_str", ""),
                              args.value("new_str", ""));
    if (call.name == "shell")
        return workspace.shell(args.value("command", ""), policy);
    return "ERROR: unknown tool: " + call.name;
}

} // namespace trajkit::sandbox
