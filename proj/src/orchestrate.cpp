// Copyright 2026 the trajkit authors
// SPDX-License-Identifier: Apache-2.0

#include "trajkit/orchestrate.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "trajkit/detrand.hpp"
#include "trajkit/patchdiff.hpp"

namespace fs = std::filesystem;

namespace trajkit::orchestrate {

namespace {

const char* kScaffoldSystemPrompt =
    "You are a software engineering agent working in a repository checkout. "
    "Investigate with the view tool, modify files with the edit tool, and call "
    "submit when the change is complete. Keep edits minimal and focused.";

// Non-canonical self-evaluation wording; the acceptance rubric is simply an
// explicit REJECT token in the reply.
const char* kSelfEvalPreamble =
    "Self-evaluation: you were asked to address the instruction below and "
    "produced the attached patch. Reply ACCEPT if the change is aligned with "
    "the instruction, or REJECT if you did not make an aligned change.";

const char* kSynthPrPreamble =
    "Write a new pull request description for the change made in the session "
    "transcript below. Follow the format of the demonstration pull request. "
    "Start with a 'Title:' line, then an empty line, then the body.";

std::string step_role_to_chat(trajectory::Role role)
{
    return std::string(trajectory::role_name(role));
}

} // namespace

std::string function_id(const CodebaseRef& codebase, const FunctionRef& function)
{
    return codebase.repo_name + ":" + function.file + ":" + std::to_string(function.line) + ":"
        + function.name;
}

BugPromptCatalog BugPromptCatalog::from_json(const nlohmann::json& j)
{
    BugPromptCatalog catalog;
    std::set<int> ids;
    for (const auto& entry : j.at("entries")) {
        BugPrompt bug{entry.at("id").get<int>(), entry.at("description").get<std::string>()};
        if (bug.id < 1 || bug.id > static_cast<int>(kExpectedEntries))
            throw std::invalid_argument("bug catalog id out of range: " + std::to_string(bug.id));
        if (!ids.insert(bug.id).second)
            throw std::invalid_argument("duplicate bug catalog id: " + std::to_string(bug.id));
        catalog.entries_.push_back(std::move(bug));
    }
    if (catalog.entries_.size() != kExpectedEntries)
        throw std::invalid_argument("bug catalog must contain exactly "
                                    + std::to_string(kExpectedEntries) + " entries, got "
                                    + std::to_string(catalog.entries_.size()));
    return catalog;
}

BugPromptCatalog BugPromptCatalog::from_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open bug catalog: " + path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
}

std::vector<DemonstrationPR> demo_prs_from_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open demonstration PR pool: " + path);
    nlohmann::json j;
    in >> j;
    std::vector<DemonstrationPR> demos;
    for (const auto& entry : j.at("demonstrations"))
        demos.push_back({entry.at("id").get<std::string>(), entry.at("title").get<std::string>(),
                         entry.at("body").get<std::string>()});
    if (demos.empty())
        throw std::runtime_error("demonstration PR pool is empty: " + path);
    return demos;
}

nlohmann::json to_json(const SyntheticPR& pr)
{
    return {{"schema_version", trajectory::kSchemaVersion},
            {"id", pr.id},
            {"title", pr.title},
            {"body", pr.body},
            {"source_trajectory_id", pr.source_trajectory_id},
            {"demonstration_id", pr.demonstration_id}};
}

SyntheticPR synthetic_pr_from_json(const nlohmann::json& j)
{
    int version = j.value("schema_version", -1);
    if (version != trajectory::kSchemaVersion)
        throw trajectory::SchemaVersionError(version);
    return {j.at("id").get<std::string>(), j.at("title").get<std::string>(),
            j.at("body").get<std::string>(), j.at("source_trajectory_id").get<std::string>(),
            j.at("demonstration_id").get<std::string>()};
}

namespace {

struct BlockFrame {
    std::size_t indent;
    bool is_class;
};

std::size_t leading_whitespace(const std::string& line)
{
    std::size_t i = 0;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t'))
        ++i;
    return i;
}

// Matches "def name(" / "async def name(" / "class Name" at the given
// offset; returns the identifier or empty.
std::string match_def(const std::string& line, std::size_t at, bool& is_class)
{
    std::string_view rest(line.data() + at, line.size() - at);
    is_class = false;
    if (rest.rfind("async ", 0) == 0)
        rest.remove_prefix(6);
    if (rest.rfind("def ", 0) == 0)
        rest.remove_prefix(4);
    else if (rest.rfind("class ", 0) == 0) {
        rest.remove_prefix(6);
        is_class = true;
    } else {
        return "";
    }
    std::size_t end = 0;
    while (end < rest.size()
           && (std::isalnum(static_cast<unsigned char>(rest[end])) || rest[end] == '_'))
        ++end;
    if (end == 0)
        return "";
    if (!is_class) {
        std::size_t paren = end;
        while (paren < rest.size() && rest[paren] == ' ')
            ++paren;
        if (paren >= rest.size() || rest[paren] != '(')
            return "";
    }
    return std::string(rest.substr(0, end));
}

} // namespace

std::vector<FunctionRef> enumerate_functions(const CodebaseRef& codebase,
                                             const std::vector<std::string>& extensions)
{
    if (!fs::is_directory(codebase.root))
        throw std::runtime_error("codebase root is not readable: " + codebase.root.string());

    std::vector<std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(codebase.root)) {
        if (!entry.is_regular_file())
            continue;
        std::string ext = entry.path().extension().string();
        if (std::find(extensions.begin(), extensions.end(), ext) != extensions.end())
            files.push_back(fs::relative(entry.path(), codebase.root).generic_string());
    }
    std::sort(files.begin(), files.end());

    std::vector<FunctionRef> functions;
    for (const std::string& file : files) {
        std::ifstream in(codebase.root / file);
        std::string line;
        std::size_t number = 0;
        std::vector<BlockFrame> stack;
        while (std::getline(in, line)) {
            ++number;
            std::size_t indent = leading_whitespace(line);
            if (indent == line.size())
                continue;
            bool is_class = false;
            std::string name = match_def(line, indent, is_class);
            if (name.empty())
                continue;
            while (!stack.empty() && stack.back().indent >= indent)
                stack.pop_back();
            // Keep defs at module level or directly inside a class body;
            // defs nested inside another def are implementation details.
            bool keep = !is_class && (stack.empty() || stack.back().is_class);
            if (keep)
                functions.push_back({file, name, number});
            stack.push_back({indent, is_class});
        }
    }
    return functions;
}

std::string render_first_prompt(const FunctionRef& function, const BugPrompt& bug,
                                std::string_view template_text)
{
    std::string out(template_text);
    auto replace_all = [&out](std::string_view slot, const std::string& value) {
        std::size_t pos = 0;
        while ((pos = out.find(slot, pos)) != std::string::npos) {
            out.replace(pos, slot.size(), value);
            pos += value.size();
        }
    };
    replace_all("{bug}", bug.description);
    replace_all("{func}", function.name);
    return out;
}

OrchestratorConfig OrchestratorConfig::from_json(const nlohmann::json& j)
{
    OrchestratorConfig config;
    config.endpoint = chat::EndpointConfig::from_json(j.at("endpoint"));
    for (const auto& c : j.at("codebases"))
        config.codebases.push_back({fs::path(c.at("root").get<std::string>()),
                                    c.value("commit", "unversioned"),
                                    c.at("repo_name").get<std::string>()});
    config.bug_catalog_path = j.at("bug_catalog").get<std::string>();
    config.demo_prs_path = j.at("demo_prs").get<std::string>();
    if (j.contains("out_dir"))
        config.out_dir = fs::path(j.at("out_dir").get<std::string>());
    config.seed = j.value("seed", 0ULL);
    config.workers = j.value("workers", 1);
    if (j.contains("shell")) {
        config.shell.enabled = j.at("shell").value("enabled", false);
        if (j.at("shell").contains("allowlist"))
            for (const auto& cmd : j.at("shell").at("allowlist"))
                config.shell.allowlist.push_back(cmd.get<std::string>());
    }
    if (j.contains("source_extensions")) {
        config.source_extensions.clear();
        for (const auto& ext : j.at("source_extensions"))
            config.source_extensions.push_back(ext.get<std::string>());
    }
    config.first_prompt_template = j.value("first_prompt_template",
                                           std::string(kDefaultFirstPromptTemplate));
    if (config.workers < 1)
        throw std::invalid_argument("workers must be >= 1");
    return config;
}

nlohmann::json to_json(const RejectionRecord& rejection)
{
    return {{"schema_version", trajectory::kSchemaVersion},
            {"function_id", rejection.function_id},
            {"repo", rejection.repo},
            {"attempts", rejection.attempts},
            {"reason", rejection.reason}};
}

Orchestrator::Orchestrator(OrchestratorConfig config, std::shared_ptr<chat::ChatEndpoint> endpoint,
                           BugPromptCatalog catalog, std::vector<DemonstrationPR> demos)
    : config_(std::move(config)),
      endpoint_(std::move(endpoint)),
      catalog_(std::move(catalog)),
      demos_(std::move(demos))
{
}

Orchestrator::LoopResult Orchestrator::run_agent_loop(sandbox::Workspace& workspace,
                                                      const std::string& user_prompt,
                                                      const std::string& trace_tag)
{
    using trajectory::Role;
    using trajectory::Step;

    LoopResult result;
    result.steps.push_back(Step{Role::System, "", kScaffoldSystemPrompt, {}, ""});
    result.steps.push_back(Step{Role::User, "", user_prompt, {}, ""});

    chat::ChatRequest request;
    request.model = config_.endpoint.model_id;
    request.tools = sandbox::scaffold_tool_definitions(config_.shell.enabled);
    request.trace_tag = trace_tag;
    request.messages.push_back({"system", kScaffoldSystemPrompt, {}, ""});
    request.messages.push_back({"user", user_prompt, {}, ""});

    result.stop_reason = "step_limit";
    for (int turn = 0; turn < config_.endpoint.max_steps; ++turn) {
        chat::ChatResponse response = endpoint_->complete(request);

        Step assistant;
        assistant.role = Role::Assistant;
        assistant.reasoning = response.reasoning;
        assistant.content = response.content;
        for (const auto& call : response.tool_calls)
            assistant.tool_calls.push_back({call.name, call.arguments});
        result.steps.push_back(assistant);

        chat::ChatMessage assistant_msg{"assistant", response.content, response.tool_calls, ""};
        request.messages.push_back(assistant_msg);

        if (response.finish_reason == "length") {
            result.stop_reason = "context_overflow";
            break;
        }
        if (response.tool_calls.empty()) {
            result.stop_reason = "stopped";
            break;
        }

        bool submitted = false;
        for (const auto& call : response.tool_calls) {
            std::string tool_output;
            if (call.name == "submit") {
                result.patch = workspace.diff();
                tool_output = result.patch.empty() ? "(no changes)" : result.patch;
                submitted = true;
            } else {
                tool_output = sandbox::execute_tool(workspace, call, config_.shell);
            }
            Step tool;
            tool.role = Role::Tool;
            tool.tool_result = tool_output;
            result.steps.push_back(tool);
            request.messages.push_back({"tool", tool_output, {}, call.id});
            if (submitted)
                break;
        }
        if (submitted) {
            result.stop_reason = "submitted";
            break;
        }
    }
    if (result.stop_reason != "submitted")
        result.patch = workspace.diff();
    return result;
}

bool Orchestrator::self_evaluate(const std::string& instruction, const std::string& patch,
                                 const std::string& trace_tag)
{
    chat::ChatRequest request;
    request.model = config_.endpoint.model_id;
    request.trace_tag = trace_tag;
    request.messages.push_back({"system", kSelfEvalPreamble, {}, ""});
    request.messages.push_back(
        {"user", "Instruction: " + instruction + "\n\nPatch:\n" + patch, {}, ""});
    chat::ChatResponse response = endpoint_->complete(request);
    // Accept unless the reply explicitly rejects.
    return response.content.find("REJECT") == std::string::npos;
}

FirstRolloutOutcome Orchestrator::first_rollout(const CodebaseRef& codebase,
                                                const FunctionRef& function)
{
    const std::string fid = function_id(codebase, function);
    std::mt19937_64 rng(detrand::fnv1a64(fid, config_.seed ^ detrand::kFnvOffset));

    FirstRolloutOutcome outcome;
    std::string last_reason = "self-rejected";
    for (int attempt = 1; attempt <= 3; ++attempt) {
        outcome.attempts = attempt;
        const BugPrompt& bug = catalog_.at_index(detrand::bounded(rng, catalog_.size()));
        const std::string prompt = render_first_prompt(function, bug,
                                                       config_.first_prompt_template);

        sandbox::Workspace workspace(codebase.root);
        LoopResult loop = run_agent_loop(workspace, prompt, "first:" + fid);
        if (loop.patch.empty()) {
            last_reason = "empty patch (" + loop.stop_reason + ")";
            continue;
        }
        if (!self_evaluate(prompt, loop.patch, "selfeval:" + fid)) {
            last_reason = "self-rejected";
            continue;
        }

        trajectory::Trajectory t1;
        t1.id = "t1:" + fid + ":a" + std::to_string(attempt);
        t1.rollout_stage = trajectory::RolloutStage::First;
        t1.steps = std::move(loop.steps);
        t1.patch = loop.patch;
        t1.metadata.repo = codebase.repo_name;
        t1.metadata.commit = codebase.commit;
        t1.metadata.function_ref = fid;
        t1.metadata.bug_prompt_id = bug.id;
        t1.metadata.teacher_id = config_.endpoint.model_id;
        outcome.accepted = std::move(t1);
        return outcome;
    }
    outcome.rejection = RejectionRecord{fid, codebase.repo_name, outcome.attempts, last_reason};
    return outcome;
}

SyntheticPR Orchestrator::make_synthetic_pr(const trajectory::Trajectory& first,
                                            const CodebaseRef& codebase,
                                            const FunctionRef& function)
{
    const std::string fid = function_id(codebase, function);
    std::mt19937_64 rng(detrand::fnv1a64(fid, config_.seed ^ 0xabcdef1234567890ULL));
    const DemonstrationPR& demo = demos_[detrand::bounded(rng, demos_.size())];

    std::ostringstream transcript;
    for (const trajectory::Step& step : first.steps) {
        transcript << "[" << step_role_to_chat(step.role) << "] " << step.content << "\n";
        for (const auto& call : step.tool_calls)
            transcript << "  tool_call " << call.name << " " << call.arguments.dump() << "\n";
        if (!step.tool_result.empty())
            transcript << "  tool_result " << step.tool_result << "\n";
    }

    chat::ChatRequest request;
    request.model = config_.endpoint.model_id;
    request.trace_tag = "pr:" + fid;
    request.messages.push_back({"system", kSynthPrPreamble, {}, ""});
    request.messages.push_back({"user",
                                "Demonstration pull request:\nTitle: " + demo.title + "\n\n"
                                    + demo.body + "\n\nSession transcript:\n" + transcript.str()
                                    + "\nFinal patch:\n" + *first.patch,
                                {},
                                ""});
    chat::ChatResponse response = endpoint_->complete(request);
    if (response.content.empty())
        throw GenerationError("synthetic PR generation returned an empty completion for " + fid);

    std::string title;
    std::string body;
    std::istringstream lines(response.content);
    std::string line;
    bool first_line = true;
    while (std::getline(lines, line)) {
        if (first_line) {
            first_line = false;
            if (line.rfind("Title:", 0) == 0) {
                title = line.substr(6);
                while (!title.empty() && title.front() == ' ')
                    title.erase(title.begin());
                continue;
            }
            title = line;
            continue;
        }
        body += line;
        body += "\n";
    }
    while (!body.empty() && (body.front() == '\n'))
        body.erase(body.begin());
    if (body.empty())
        throw GenerationError("synthetic PR body is empty for " + fid);
    return SyntheticPR{"pr:" + fid, title, body, first.id, demo.id};
}

trajectory::Trajectory Orchestrator::second_rollout(const CodebaseRef& codebase,
                                                    const FunctionRef& function,
                                                    const SyntheticPR& pr)
{
    const std::string fid = function_id(codebase, function);
    sandbox::Workspace workspace(codebase.root);
    LoopResult loop = run_agent_loop(workspace, pr.title + "\n\n" + pr.body, "second:" + fid);

    trajectory::Trajectory t2;
    t2.id = "t2:" + fid;
    t2.rollout_stage = trajectory::RolloutStage::Second;
    t2.steps = std::move(loop.steps);
    t2.patch = loop.patch; // possibly empty: recall will be 0
    t2.metadata.repo = codebase.repo_name;
    t2.metadata.commit = codebase.commit;
    t2.metadata.function_ref = fid;
    t2.metadata.teacher_id = config_.endpoint.model_id;
    t2.metadata.synthetic_pr_id = pr.id;
    return t2;
}

void recover_jsonl(const fs::path& path)
{
    if (!fs::exists(path))
        return;
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    std::string body = buffer.str();
    in.close();
    if (body.empty() || body.back() == '\n')
        return;
    std::size_t last_newline = body.find_last_of('\n');
    std::string keep = last_newline == std::string::npos ? "" : body.substr(0, last_newline + 1);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << keep;
}

namespace {

class ShardWriter {
public:
    explicit ShardWriter(fs::path path) : path_(std::move(path))
    {
        recover_jsonl(path_);
        stream_.open(path_, std::ios::app);
        if (!stream_)
            throw std::runtime_error("cannot open shard for append: " + path_.string());
    }

    void append(const nlohmann::json& record)
    {
        stream_ << record.dump() << "\n";
        stream_.flush();
    }

private:
    fs::path path_;
    std::ofstream stream_;
};

std::set<std::string> scan_completed_functions(const fs::path& out_dir)
{
    std::set<std::string> completed;
    auto scan = [&completed](const fs::path& shard, const char* field) {
        if (!fs::exists(shard))
            return;
        std::ifstream in(shard);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty())
                continue;
            auto parsed = nlohmann::json::parse(line, nullptr, false);
            if (parsed.is_discarded())
                continue;
            if (parsed.contains(field))
                completed.insert(parsed.at(field).get<std::string>());
            else if (parsed.contains("metadata") && parsed.at("metadata").contains("function_ref"))
                completed.insert(parsed.at("metadata").at("function_ref").get<std::string>());
        }
    };
    scan(out_dir / "t1.jsonl", "__none__");
    scan(out_dir / "rejections.jsonl", "function_id");
    return completed;
}

void write_checkpoint(const fs::path& out_dir, const std::set<std::string>& completed)
{
    nlohmann::json j{{"completed", completed}};
    fs::path tmp = out_dir / "checkpoint.json.tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << j.dump(2) << "\n";
    }
    fs::rename(tmp, out_dir / "checkpoint.json");
}

std::set<std::string> read_checkpoint(const fs::path& out_dir)
{
    std::set<std::string> completed;
    fs::path path = out_dir / "checkpoint.json";
    if (!fs::exists(path))
        return completed;
    std::ifstream in(path);
    nlohmann::json j;
    in >> j;
    for (const auto& id : j.at("completed"))
        completed.insert(id.get<std::string>());
    return completed;
}

std::string patch_dedup_key(const std::string& patch_text)
{
    auto patch = patchdiff::parse_unified_diff(patch_text);
    for (auto& file : patch.files)
        for (auto& hunk : file.hunks) {
            hunk.section.clear();
            for (auto& line : hunk.lines)
                line.text = patchdiff::trim_trailing_whitespace(line.text);
        }
    std::sort(patch.files.begin(), patch.files.end(),
              [](const patchdiff::FilePatch& a, const patchdiff::FilePatch& b) {
                  return std::tie(a.old_path, a.new_path) < std::tie(b.old_path, b.new_path);
              });
    return patchdiff::to_unified_diff(patch);
}

} // namespace

CampaignStats run_campaign(const OrchestratorConfig& config,
                      std::shared_ptr<chat::ChatEndpoint> endpoint_override)
{
    auto start_time = std::chrono::steady_clock::now();
    fs::create_directories(config.out_dir);

    BugPromptCatalog catalog = BugPromptCatalog::from_file(config.bug_catalog_path);
    std::vector<DemonstrationPR> demos = demo_prs_from_file(config.demo_prs_path);

    // Resume state: the checkpoint plus whatever already landed in shards
    // (a crash can sit between the two).
    std::set<std::string> completed = read_checkpoint(config.out_dir);
    for (const fs::path shard : {config.out_dir / "t1.jsonl", config.out_dir / "t2.jsonl",
                                 config.out_dir / "synthetic_prs.jsonl",
                                 config.out_dir / "verification.jsonl",
                                 config.out_dir / "rejections.jsonl"})
        recover_jsonl(shard);
    for (const std::string& fid : scan_completed_functions(config.out_dir))
        completed.insert(fid);

    std::set<std::string> seen_patches;
    if (fs::exists(config.out_dir / "t1.jsonl"))
        for (const auto& t : trajectory::read_trajectories_jsonl((config.out_dir / "t1.jsonl").string()))
            if (t.patch)
                seen_patches.insert(patch_dedup_key(*t.patch));

    struct Task {
        const CodebaseRef* codebase;
        FunctionRef function;
        std::string fid;
    };
    std::vector<Task> tasks;
    std::size_t functions_total = 0;
    for (const CodebaseRef& codebase : config.codebases) {
        for (const FunctionRef& function : enumerate_functions(codebase, config.source_extensions)) {
            ++functions_total;
            std::string fid = function_id(codebase, function);
            if (!completed.count(fid))
                tasks.push_back({&codebase, function, std::move(fid)});
        }
    }

    ShardWriter t1_shard(config.out_dir / "t1.jsonl");
    ShardWriter t2_shard(config.out_dir / "t2.jsonl");
    ShardWriter pr_shard(config.out_dir / "synthetic_prs.jsonl");
    ShardWriter verification_shard(config.out_dir / "verification.jsonl");
    ShardWriter rejection_shard(config.out_dir / "rejections.jsonl");

    std::mutex emit_mutex; // one writer per shard group + checkpoint + stats
    CampaignStats stats;
    stats.functions_total = functions_total;
    stats.completed = completed.size();
    std::vector<std::string> failures;

    std::atomic<std::size_t> next_task{0};
    auto worker_body = [&](int worker_index) {
        std::shared_ptr<chat::ChatEndpoint> endpoint = endpoint_override;
        if (!endpoint)
            endpoint = std::make_shared<chat::HttpChatEndpoint>(config.endpoint);
        Orchestrator orchestrator(config, endpoint, catalog, demos);
        (void)worker_index;

        while (true) {
            std::size_t index = next_task.fetch_add(1);
            if (index >= tasks.size())
                return;
            const Task& task = tasks[index];
            try {
                FirstRolloutOutcome outcome = orchestrator.first_rollout(*task.codebase,
                                                                         task.function);
                if (outcome.rejection) {
                    std::lock_guard<std::mutex> lock(emit_mutex);
                    rejection_shard.append(to_json(*outcome.rejection));
                    completed.insert(task.fid);
                    write_checkpoint(config.out_dir, completed);
                    ++stats.rejected;
                    ++stats.completed;
                    continue;
                }

                trajectory::Trajectory t1 = std::move(*outcome.accepted);
                std::string dedup_key = patch_dedup_key(*t1.patch);
                {
                    std::lock_guard<std::mutex> lock(emit_mutex);
                    if (!seen_patches.insert(dedup_key).second) {
                        rejection_shard.append(to_json(RejectionRecord{
                            task.fid, task.codebase->repo_name, outcome.attempts,
                            "duplicate patch"}));
                        completed.insert(task.fid);
                        write_checkpoint(config.out_dir, completed);
                        ++stats.rejected;
                        ++stats.completed;
                        continue;
                    }
                }

                SyntheticPR pr = orchestrator.make_synthetic_pr(t1, *task.codebase, task.function);
                trajectory::Trajectory t2 = orchestrator.second_rollout(*task.codebase,
                                                                        task.function, pr);
                verification::VerificationRecord record = verification::verify_pair(t1, t2);

                std::lock_guard<std::mutex> lock(emit_mutex);
                t1_shard.append(trajectory::to_json(t1));
                pr_shard.append(to_json(pr));
                t2_shard.append(trajectory::to_json(t2));
                verification_shard.append(verification::to_json(record));
                completed.insert(task.fid);
                write_checkpoint(config.out_dir, completed);
                ++stats.accepted;
                ++stats.completed;
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(emit_mutex);
                ++stats.failed;
                failures.push_back(task.fid + ": " + e.what());
                std::cerr << "warning: function " << task.fid << " failed: " << e.what() << "\n";
            }
        }
    };

    if (config.workers == 1) {
        worker_body(0);
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < config.workers; ++i)
            pool.emplace_back(worker_body, i);
        for (std::thread& thread : pool)
            thread.join();
    }

    auto wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - start_time)
                       .count();
    std::sort(failures.begin(), failures.end());
    double attempted = static_cast<double>(stats.accepted + stats.rejected);
    nlohmann::json manifest{
        {"subcommand", "generate"},
        {"seed", config.seed},
        {"workers", config.workers},
        {"teacher_id", config.endpoint.model_id},
        {"functions_total", stats.functions_total},
        {"completed", completed},
        {"accepted", stats.accepted},
        {"rejected", stats.rejected},
        {"failed", stats.failed},
        {"failures", failures},
        {"rejection_rate", attempted == 0.0 ? 0.0 : static_cast<double>(stats.rejected) / attempted},
        {"shards",
         {{"t1", "t1.jsonl"},
          {"t2", "t2.jsonl"},
          {"synthetic_prs", "synthetic_prs.jsonl"},
          {"verification", "verification.jsonl"},
          {"rejections", "rejections.jsonl"}}},
        {"wall_ms", wall_ms}};
    std::ofstream manifest_out(config.out_dir / "campaign.json", std::ios::trunc);
    manifest_out << manifest.dump(2) << "\n";
    return stats;
}

} // namespace trajkit::orchestrate
