// Copyright 2026 the trajkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "trajkit/chat.hpp"
#include "trajkit/sandbox.hpp"
#include "trajkit/trajectory.hpp"
#include "trajkit/verification.hpp"

namespace trajkit::orchestrate {

struct CodebaseRef {
    std::filesystem::path root;
    std::string commit;
    std::string repo_name;
};

struct FunctionRef {
    std::string file; // repo-relative path
    std::string name;
    std::size_t line = 0; // 1-based

    friend bool operator==(const FunctionRef&, const FunctionRef&) = default;
};

std::string function_id(const CodebaseRef& codebase, const FunctionRef& function);

struct BugPrompt {
    int id = 0;
    std::string description;
};

/// The 51-entry bug-type catalog. The bundled catalog is a descriptive
/// stand-in; edit data/bug_catalog.json to supply your own.
class BugPromptCatalog {
public:
    static constexpr std::size_t kExpectedEntries = 51;

    static BugPromptCatalog from_json(const nlohmann::json& j);
    static BugPromptCatalog from_file(const std::string& path);

    const BugPrompt& at_index(std::size_t index) const { return entries_.at(index); }
    std::size_t size() const { return entries_.size(); }
    const std::vector<BugPrompt>& entries() const { return entries_; }

private:
    std::vector<BugPrompt> entries_;
};

struct DemonstrationPR {
    std::string id;
    std::string title;
    std::string body;
};

std::vector<DemonstrationPR> demo_prs_from_file(const std::string& path);

struct SyntheticPR {
    std::string id;
    std::string title;
    std::string body;
    std::string source_trajectory_id;
    std::string demonstration_id;
};

nlohmann::json to_json(const SyntheticPR& pr);
SyntheticPR synthetic_pr_from_json(const nlohmann::json& j);

/// Every top-level and class-level function definition found by a light
/// syntactic scan of the codebase's source files, ordered by (file, line).
std::vector<FunctionRef> enumerate_functions(const CodebaseRef& codebase,
                                             const std::vector<std::string>& extensions = {".py"});

inline constexpr std::string_view kDefaultFirstPromptTemplate =
    "There is a {bug} downstream of function {func}.";

std::string render_first_prompt(const FunctionRef& function, const BugPrompt& bug,
                                std::string_view template_text = kDefaultFirstPromptTemplate);

struct OrchestratorConfig {
    chat::EndpointConfig endpoint;
    std::vector<CodebaseRef> codebases;
    std::string bug_catalog_path;
    std::string demo_prs_path;
    std::filesystem::path out_dir;
    std::uint64_t seed = 0;
    int workers = 1;
    sandbox::ShellPolicy shell;
    std::vector<std::string> source_extensions = {".py"};
    std::string first_prompt_template = std::string(kDefaultFirstPromptTemplate);

    static OrchestratorConfig from_json(const nlohmann::json& j);
};

struct RejectionRecord {
    std::string function_id;
    std::string repo;
    int attempts = 0;
    std::string reason;
};

nlohmann::json to_json(const RejectionRecord& rejection);

struct FirstRolloutOutcome {
    std::optional<trajectory::Trajectory> accepted; // carries the patch
    std::optional<RejectionRecord> rejection;
    int attempts = 0;
};

class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Drives the two-rollout pipeline for one campaign.
class Orchestrator {
public:
    Orchestrator(OrchestratorConfig config, std::shared_ptr<chat::ChatEndpoint> endpoint,
                 BugPromptCatalog catalog, std::vector<DemonstrationPR> demos);

    /// Agent rollout seeded by a bug prompt, self-evaluated afterwards;
    /// resamples the bug prompt on self-rejection, up to 3 attempts.
    FirstRolloutOutcome first_rollout(const CodebaseRef& codebase, const FunctionRef& function);

    /// One completion request carrying the first trajectory's transcript
    /// plus a seeded demonstration PR; parses the reply into title/body.
    SyntheticPR make_synthetic_pr(const trajectory::Trajectory& first,
                                  const CodebaseRef& codebase, const FunctionRef& function);

    /// Fresh sandbox; the synthetic PR text is the only task input.
    trajectory::Trajectory second_rollout(const CodebaseRef& codebase, const FunctionRef& function,
                                          const SyntheticPR& pr);

    const OrchestratorConfig& config() const { return config_; }

private:
    struct LoopResult {
        std::vector<trajectory::Step> steps;
        std::string patch;
        std::string stop_reason; // submitted | stopped | step_limit | context_overflow
    };

    LoopResult run_agent_loop(sandbox::Workspace& workspace, const std::string& user_prompt,
                              const std::string& trace_tag);
    bool self_evaluate(const std::string& instruction, const std::string& patch,
                       const std::string& trace_tag);

    OrchestratorConfig config_;
    std::shared_ptr<chat::ChatEndpoint> endpoint_;
    BugPromptCatalog catalog_;
    std::vector<DemonstrationPR> demos_;
};

struct CampaignStats {
    std::size_t functions_total = 0;
    std::size_t completed = 0;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t failed = 0; // transport or internal errors, retried on rerun
};

/// Full campaign: first rollout -> synthetic PR -> second rollout ->
/// verification, for every enumerated function, with JSONL shards, an
/// atomic resume checkpoint and a campaign manifest under out_dir.
/// `endpoint_override` (used by tests and mock mode) is shared by all
/// workers; otherwise each worker builds its own HTTP client.
CampaignStats run_campaign(const OrchestratorConfig& config,
                      std::shared_ptr<chat::ChatEndpoint> endpoint_override = nullptr);

/// Truncates a trailing torn line (crash artifact) from a JSONL file.
void recover_jsonl(const std::filesystem::path& path);

} // namespace trajkit::orchestrate
