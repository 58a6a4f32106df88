// Copyright 2026 the trajkit authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one test case per release criterion, each printing a
// [PASS]/[FAIL] line with its runtime bound enforced in-line.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "trajkit/chat.hpp"
#include "trajkit/costmodel.hpp"
#include "trajkit/curation.hpp"
#include "trajkit/orchestrate.hpp"
#include "trajkit/patchdiff.hpp"
#include "trajkit/proxy.hpp"
#include "trajkit/scaling.hpp"
#include "trajkit/stats.hpp"
#include "trajkit/trajectory.hpp"
#include "trajkit/verification.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace trajkit;

namespace {

const fs::path kTestData = TRAJKIT_TEST_DATA_DIR;
const fs::path kData = TRAJKIT_DATA_DIR;
const char* kCli = TRAJKIT_CLI_PATH;

class Criterion {
public:
    Criterion(int number, std::string label)
        : number_(number), label_(std::move(label)), start_(std::chrono::steady_clock::now())
    {
    }

    ~Criterion()
    {
        double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
                             .count();
        bool failed = std::uncaught_exceptions() > 0;
        std::printf("[%s] criterion %d: %s (%.2fs)\n", failed ? "FAIL" : "PASS", number_,
                    label_.c_str(), seconds);
        std::fflush(stdout);
    }

    double elapsed_s() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    int number_;
    std::string label_;
    std::chrono::steady_clock::time_point start_;
};

std::string slurp(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::multiset<std::string> sorted_lines(const fs::path& path)
{
    std::multiset<std::string> lines;
    std::istringstream in(slurp(path));
    std::string line;
    while (std::getline(in, line))
        if (!line.empty())
            lines.insert(line);
    return lines;
}

fs::path fresh_dir(const std::string& tag)
{
    fs::path dir = fs::temp_directory_path()
        / ("trajkit-acc-" + tag + "-" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<scaling::CostPerfPoint> vllm_points()
{
    return {{0.075, 33.47, 0.81, 3}, {0.140, 36.40, 1.25, 3}, {0.280, 38.87, 1.15, 3},
            {0.560, 39.67, 1.62, 3}, {0.784, 41.80, 3.56, 3}, {1.382, 44.00, 1.22, 3},
            {2.987, 46.60, 0.69, 3}};
}

orchestrate::OrchestratorConfig fixture_campaign(const fs::path& out_dir, int workers)
{
    orchestrate::OrchestratorConfig config;
    config.endpoint.base_url = "http://mock.invalid/v1";
    config.endpoint.model_id = "mock-teacher";
    config.endpoint.max_steps = 115;
    config.codebases.push_back({kTestData / "fixture_repo", "c0ffee42", "fixture"});
    config.bug_catalog_path = (kData / "bug_catalog.json").string();
    config.demo_prs_path = (kData / "demo_prs.json").string();
    config.out_dir = out_dir;
    config.seed = 101;
    config.workers = workers;
    return config;
}

trajectory::Trajectory tiny_record(const std::string& id, std::size_t steps,
                                   std::size_t bytes_per_step, int patch_line)
{
    trajectory::Trajectory t;
    t.id = id;
    for (std::size_t i = 0; i < steps; ++i) {
        trajectory::Step step;
        step.role = trajectory::Role::Assistant;
        step.content = std::string(bytes_per_step, 'x');
        t.steps.push_back(std::move(step));
    }
    std::ostringstream patch;
    patch << "--- a/f.py\n+++ b/f.py\n@@ -1,1 +1,2 @@\n base\n+line " << patch_line << "\n";
    t.patch = patch.str();
    return t;
}

int run_cli(const std::string& args)
{
    std::string command = std::string(kCli) + " " + args;
    int status = std::system(command.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST_CASE("criterion 1: recall matches the brute-force oracle on 1000 random pairs")
{
    Criterion criterion(1, "recall oracle equivalence (1000 random pairs)");

    static const char* kPaths[] = {"a.py", "b.py", "c/d.py"};
    static const char* kTexts[] = {"x = 1", "y = 2", "return 0", "pass", "import os", "z()"};
    std::mt19937 rng(0xACCE55);
    std::uniform_int_distribution<std::size_t> size_dist(1, 20);
    std::uniform_int_distribution<int> path_dist(0, 2);
    std::uniform_int_distribution<int> kind_dist(0, 1);
    std::uniform_int_distribution<int> text_dist(0, 5);

    auto random_keys = [&](std::size_t max_size) {
        std::vector<patchdiff::ChangeKey> keys;
        std::size_t count = size_dist(rng) % (max_size + 1);
        for (std::size_t i = 0; i < count; ++i)
            keys.push_back({kPaths[path_dist(rng)],
                            kind_dist(rng) ? patchdiff::LineKind::Added
                                           : patchdiff::LineKind::Removed,
                            kTexts[text_dist(rng)]});
        return keys;
    };
    auto oracle = [](const std::vector<patchdiff::ChangeKey>& candidate,
                     const std::vector<patchdiff::ChangeKey>& reference) {
        std::size_t hits = 0;
        std::vector<bool> used(candidate.size(), false);
        for (const auto& key : reference)
            for (std::size_t i = 0; i < candidate.size(); ++i)
                if (!used[i] && candidate[i] == key) {
                    used[i] = true;
                    ++hits;
                    break;
                }
        return static_cast<double>(hits) / static_cast<double>(reference.size());
    };

    std::size_t checked = 0;
    while (checked < 1000) {
        auto reference = random_keys(20);
        if (reference.empty())
            continue;
        auto candidate = random_keys(20);
        patchdiff::ChangeSet ref_set, cand_set;
        for (const auto& key : reference)
            ref_set.insert(key);
        for (const auto& key : candidate)
            cand_set.insert(key);
        REQUIRE(patchdiff::recall(cand_set, ref_set) == oracle(candidate, reference));
        ++checked;
    }
    REQUIRE(criterion.elapsed_s() < 5.0);
}

TEST_CASE("criterion 2: bucket assignment matches the three-way definition on 1000 draws")
{
    Criterion criterion(2, "verification bucketing (1000 random recalls)");
    std::mt19937 rng(2);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    std::uniform_int_distribution<int> edge(0, 9);
    for (int i = 0; i < 1000; ++i) {
        int roll = edge(rng);
        double r = roll == 0 ? 0.0 : roll == 9 ? 1.0 : dist(rng);
        verification::Bucket bucket = verification::bucket_of(r);
        if (r == 1.0)
            REQUIRE(bucket == verification::Bucket::Hard);
        else if (r == 0.0)
            REQUIRE(bucket == verification::Bucket::Unverified);
        else
            REQUIRE(bucket == verification::Bucket::Soft);
    }
}

TEST_CASE("criterion 3: the reference scaling fixture fits within every stated bound")
{
    Criterion criterion(3, "scaling-law fixture fit and inversions");
    scaling::ScalingFit fit = scaling::fit_power_law(vllm_points());
    REQUIRE(fit.r_squared > 0.95);
    REQUIRE(fit.mean_abs_error <= 1.0);
    REQUIRE(fit.asymptote_pct >= 60.0);
    REQUIRE(fit.asymptote_pct <= 80.0);

    double at_50 = scaling::invert(fit, 50.0);   // $K
    double at_50_5 = scaling::invert(fit, 50.5); // $K
    REQUIRE(at_50 >= 15.0 / 2.0);
    REQUIRE(at_50 <= 15.0 * 2.0);
    REQUIRE(at_50_5 >= 19.0 / 2.0);
    REQUIRE(at_50_5 <= 19.0 * 2.0);
    REQUIRE(criterion.elapsed_s() < 10.0);
}

TEST_CASE("criterion 4: exact parameter recovery and invert/predict round trip")
{
    Criterion criterion(4, "exact-recovery fit on clean synthetic data");
    std::vector<scaling::CostPerfPoint> points;
    for (double x : {0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0})
        points.push_back({x, 70.0 - 10.0 * std::pow(x, -0.5), std::nullopt, 1});
    scaling::ScalingFit fit = scaling::fit_power_law(points);
    REQUIRE(std::abs(fit.asymptote_pct - 70.0) <= 1e-6);
    REQUIRE(std::abs(fit.coefficient - 10.0) <= 1e-6);
    REQUIRE(std::abs(fit.exponent - 0.5) <= 1e-6);

    std::mt19937 rng(4);
    std::uniform_real_distribution<double> dist(0.05, 40.0);
    for (int i = 0; i < 500; ++i) {
        double x = dist(rng);
        double y = scaling::predict(fit, x);
        if (y <= 0.0 || y >= fit.asymptote_pct)
            continue;
        REQUIRE(std::abs(scaling::predict(fit, scaling::invert(fit, y)) - y) <= 1e-9);
    }
}

TEST_CASE("criterion 5: cost-model golden totals and campaign costs")
{
    Criterion criterion(5, "cost-model golden test (four totals, two campaigns)");
    json model = json::parse(slurp(kData / "cost_model.json"));
    std::map<std::string, costmodel::PricingProfile> pricing;
    for (const auto& p : model.at("pricing_profiles"))
        pricing[p.at("name").get<std::string>()] = costmodel::pricing_from_json(p);
    std::map<std::string, costmodel::TokenUsageProfile> usage;
    for (const auto& u : model.at("usage_profiles"))
        usage[u.at("name").get<std::string>()] = costmodel::usage_from_json(u);

    auto total = [&](const char* usage_name, const char* pricing_name) {
        return costmodel::trajectory_cost(usage.at(usage_name), pricing.at(pricing_name));
    };
    auto sonnet = total("issue-pipeline", "anthropic-sonnet-3.7");
    auto air = total("two-rollout", "zai-glm-4.5-air");
    auto g46 = total("two-rollout", "zai-glm-4.6");
    auto hosted = total("two-rollout", "vllm-self-hosted");
    REQUIRE(std::abs(sonnet.total - 0.5228) <= 0.005);
    REQUIRE(std::abs(air.total - 0.0918) <= 0.005);
    REQUIRE(std::abs(g46.total - 0.1699) <= 0.005);
    REQUIRE(std::abs(hosted.total - 0.1867) <= 0.005);

    REQUIRE(std::abs(costmodel::campaign_cost(16000, hosted) - 2987.0) <= 2.0);
    REQUIRE(std::abs(costmodel::campaign_cost(400, hosted) - 75.0) <= 2.0);
    REQUIRE(std::abs(costmodel::campaign_cost(16000, air) - 1469.0) <= 2.0);
    REQUIRE(std::abs(costmodel::campaign_cost(400, air) - 37.0) <= 2.0);
}

TEST_CASE("criterion 6: statistics golden test")
{
    Criterion criterion(6, "statistics golden test (7 rows, SNR pair, seed rule)");
    struct Row {
        std::vector<double> seeds;
        double mean;
        double std;
    };
    const Row rows[] = {
        {{34.40, 33.00, 33.00}, 33.47, 0.81}, {{36.80, 35.00, 37.40}, 36.40, 1.25},
        {{38.20, 40.20, 38.20}, 38.87, 1.15}, {{40.60, 37.80, 40.60}, 39.67, 1.62},
        {{40.60, 45.80, 39.00}, 41.80, 3.56}, {{43.20, 45.40, 43.40}, 44.00, 1.22},
        {{47.00, 47.00, 45.80}, 46.60, 0.69},
    };
    for (const Row& row : rows) {
        auto summary = stats::summarize({"row", row.seeds});
        REQUIRE(std::abs(summary.mean - row.mean) <= 0.01);
        REQUIRE(std::abs(summary.std - row.std) <= 0.01);
    }

    stats::SeedGroup a{"two-rollout", {28.59, 30.00, 31.41}};     // 30.00 +/- 1.41
    stats::SeedGroup b{"issue-pipeline", {24.66, 25.27, 25.88}};  // 25.27 +/- 0.61
    double snr_value = stats::snr(a, b);
    REQUIRE(snr_value >= 4.2);
    REQUIRE(snr_value <= 4.6);
    REQUIRE(stats::seeds_required(3.0, 1.2) == 2);
}

TEST_CASE("criterion 7: orchestrator determinism, rejection, caps and purity")
{
    Criterion criterion(7, "orchestrator determinism with the scripted endpoint");
    const fs::path mock = kTestData / "mock_campaign.json";
    const char* shards[] = {"t1.jsonl", "t2.jsonl", "synthetic_prs.jsonl", "verification.jsonl",
                            "rejections.jsonl"};

    // Byte-stable reruns (workers = 1).
    fs::path run_a = fresh_dir("det-a");
    fs::path run_b = fresh_dir("det-b");
    auto endpoint_a = chat::ScriptedEndpoint::from_file(mock.string());
    orchestrate::CampaignStats stats_a = orchestrate::run_campaign(fixture_campaign(run_a, 1), endpoint_a);
    REQUIRE(stats_a.accepted == 3);
    auto endpoint_b = chat::ScriptedEndpoint::from_file(mock.string());
    orchestrate::run_campaign(fixture_campaign(run_b, 1), endpoint_b);
    for (const char* shard : shards)
        REQUIRE(slurp(run_a / shard) == slurp(run_b / shard));

    // Worker count 1 vs 4: identical record sets.
    fs::path run_c = fresh_dir("det-c");
    auto endpoint_c = chat::ScriptedEndpoint::from_file(mock.string());
    orchestrate::run_campaign(fixture_campaign(run_c, 4), endpoint_c);
    for (const char* shard : shards)
        REQUIRE(sorted_lines(run_a / shard) == sorted_lines(run_c / shard));

    // Step cap and patch invariants on every emitted trajectory.
    for (const char* shard : {"t1.jsonl", "t2.jsonl"})
        for (const auto& t : trajectory::read_trajectories_jsonl((run_a / shard).string())) {
            std::size_t turns = 0;
            for (const auto& step : t.steps)
                turns += step.role == trajectory::Role::Assistant;
            REQUIRE(turns <= 115);
            REQUIRE(!t.steps.empty());
            if (t.rollout_stage == trajectory::RolloutStage::First) {
                REQUIRE(t.patch.has_value());
                REQUIRE(!t.patch->empty());
            }
        }

    // Second-rollout purity: nothing from T1 except the synthetic PR text.
    std::size_t second_requests = 0;
    for (const auto& entry : endpoint_a->request_log()) {
        if (entry.tag.rfind("second:", 0) != 0)
            continue;
        ++second_requests;
        std::string dump = entry.request.dump();
        REQUIRE(dump.find("T1-REASONING-SENTINEL") == std::string::npos);
        REQUIRE(dump.find("downstream of function") == std::string::npos);
        REQUIRE(dump.find("Self-evaluation") == std::string::npos);
        REQUIRE(dump.find("Session transcript") == std::string::npos);
    }
    REQUIRE(second_requests >= 6); // two turns per function

    // Triple self-rejection produces a rejection record.
    fs::path run_r = fresh_dir("det-r");
    orchestrate::OrchestratorConfig reject_config = fixture_campaign(run_r, 1);
    reject_config.codebases = {{kTestData / "reject_repo", "c0ffee42", "rejectrepo"}};
    auto endpoint_r = chat::ScriptedEndpoint::from_file((kTestData / "mock_reject.json").string());
    orchestrate::CampaignStats stats_r = orchestrate::run_campaign(reject_config, endpoint_r);
    REQUIRE(stats_r.rejected == 1);
    std::string rejections = slurp(run_r / "rejections.jsonl");
    REQUIRE(rejections.find("\"attempts\":3") != std::string::npos);

    for (const fs::path& dir : {run_a, run_b, run_c, run_r})
        fs::remove_all(dir);
    REQUIRE(criterion.elapsed_s() < 30.0);
}

TEST_CASE("criterion 8: curation properties")
{
    Criterion criterion(8, "curation filters, partitions, selection and mixing");
    auto counter = trajectory::default_token_counter();

    // Filters are idempotent on a mixed pool.
    std::vector<trajectory::Trajectory> pool;
    for (int i = 0; i < 60; ++i) {
        auto record = tiny_record("p" + std::to_string(i), 1 + i % 5, 40 * (1 + i % 7), i % 9);
        if (i % 3 == 0) {
            trajectory::Step tool;
            tool.role = trajectory::Role::Tool;
            tool.tool_result = std::string(200 * (i % 11), 'o');
            record.steps.push_back(tool);
        }
        pool.push_back(std::move(record));
    }
    auto lines_once = curation::filter_patch_lines(pool, 6);
    REQUIRE(curation::filter_patch_lines(lines_once, 6) == lines_once);
    auto tools_once = curation::filter_tool_output(pool, 300, counter);
    REQUIRE(curation::filter_tool_output(tools_once, 300, counter) == tools_once);

    // 9000 ordered records -> 3 partitions of 3000 with non-increasing ranges.
    std::vector<trajectory::Trajectory> big;
    big.reserve(9000);
    for (int i = 0; i < 9000; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "r%05d", i);
        big.push_back(tiny_record(id, 1 + static_cast<std::size_t>(i) / 300, 40, 1));
    }
    auto ordered = curation::order_by_truncation_ratio(big, 100, counter);
    auto partitions = curation::partition_fixed(ordered, 3000);
    REQUIRE(partitions.size() == 3);
    double previous_min = 2.0;
    for (const auto& partition : partitions) {
        REQUIRE(partition.size() == 3000);
        double lo = 2.0, hi = -1.0;
        for (const auto& t : partition) {
            double ratio = trajectory::truncation_ratio(t, 100, counter);
            lo = std::min(lo, ratio);
            hi = std::max(hi, ratio);
        }
        REQUIRE(hi <= previous_min);
        previous_min = lo;
    }

    // Ordered-truncated selection never goes below the 0.88 floor.
    auto selection = curation::select_ordered_truncated(big, 100, counter, 0.88, 5000);
    REQUIRE(!selection.records.empty());
    for (const auto& t : selection.records)
        REQUIRE((t.truncation ? t.truncation->ratio : 1.0) >= 0.88);

    // Mixing: exact proportions (+/- 1) and seed determinism.
    curation::DatasetSource specialized{"specialized", {}};
    curation::DatasetSource general{"general", {}};
    for (int i = 0; i < 3000; ++i) {
        specialized.records.push_back(tiny_record("s" + std::to_string(i), 1, 40, 1));
        general.records.push_back(tiny_record("g" + std::to_string(i), 1, 40, 2));
    }
    for (double alpha : {0.0, 0.25, 0.75, 1.0}) {
        curation::DatasetSpec spec{{specialized, general},
                                   {{"specialized", alpha}, {"general", 1.0 - alpha}},
                                   2001,
                                   999};
        auto mixed = curation::mix(spec);
        REQUIRE(mixed.size() == 2001);
        double from_specialized = 0;
        for (const auto& t : mixed)
            from_specialized += t.id.front() == 's';
        REQUIRE(std::abs(from_specialized - alpha * 2001.0) <= 1.0);
        REQUIRE(curation::mix(spec) == mixed);
    }
}

TEST_CASE("criterion 9: proxy translation fixtures and stream ordering")
{
    Criterion criterion(9, "proxy round-trip fixtures and 50-delta stream");
    proxy::ToolMapping mapping = proxy::ToolMapping::defaults();
    proxy::PathPolicy policy{"/workspace/repo", "/home/user/checkout"};
    policy.validate();

    // 20 request/response pairs covering all four client tools.
    struct ToolCase {
        std::string client;
        json input;
    };
    const ToolCase tool_cases[] = {
        {"Read", {{"file_path", "/home/user/checkout/src/main.py"}}},
        {"Edit",
         {{"file_path", "/home/user/checkout/lib/util.py"},
          {"old_string", "a = 1"},
          {"new_string", "a = 2"}}},
        {"Write", {{"file_path", "/home/user/checkout/README.md"}, {"content", "hello"}}},
        {"Bash", {{"command", "ls /home/user/checkout"}}},
    };
    for (int i = 0; i < 20; ++i) {
        const ToolCase& tool_case = tool_cases[i % 4];
        std::string text = "step " + std::to_string(i) + " touching /home/user/checkout/f"
            + std::to_string(i) + ".py";
        json inbound{
            {"model", "client-model"},
            {"max_tokens", 128 + i},
            {"system", "sandbox at /home/user/checkout"},
            {"messages",
             json::array(
                 {{{"role", "user"}, {"content", text}},
                  {{"role", "assistant"},
                   {"content",
                    json::array({{{"type", "text"}, {"text", "working"}},
                                 {{"type", "tool_use"},
                                  {"id", "toolu_" + std::to_string(i)},
                                  {"name", tool_case.client},
                                  {"input", tool_case.input}}})}}})},
            {"tools",
             json::array({{{"name", tool_case.client},
                           {"description", "d"},
                           {"input_schema", {{"type", "object"}}}}})}};
        json outbound = proxy::translate_request(inbound, mapping, policy, "upstream");

        // Text survives byte-for-byte modulo the path rewrite.
        REQUIRE(outbound.at("messages")[1].at("content")
                == policy.to_canonical(text));
        REQUIRE(outbound.at("max_tokens") == 128 + i);
        const auto& call = outbound.at("messages")[2].at("tool_calls")[0];
        json arguments = json::parse(call.at("function").at("arguments").get<std::string>());
        for (const auto& [key, value] : tool_case.input.items()) {
            (void)key;
            if (value.is_string()) {
                std::string mapped = policy.to_canonical(value.get<std::string>());
                bool found = false;
                for (const auto& [arg_key, arg_value] : arguments.items()) {
                    (void)arg_key;
                    if (arg_value.is_string() && arg_value.get<std::string>() == mapped)
                        found = true;
                }
                REQUIRE(found);
            }
        }

        // Response direction: a scaffold call comes back as the client tool
        // with the original argument values.
        auto [scaffold_name, scaffold_args] = mapping.map_call(tool_case.client, tool_case.input);
        json upstream_reply{
            {"id", "chatcmpl-" + std::to_string(i)},
            {"choices",
             json::array(
                 {{{"message",
                    {{"role", "assistant"},
                     {"content", "reply about /workspace/repo/out.log"},
                     {"tool_calls",
                      json::array({{{"id", "call_" + std::to_string(i)},
                                    {"type", "function"},
                                    {"function",
                                     {{"name", scaffold_name},
                                      {"arguments",
                                       policy.to_canonical(scaffold_args.dump())}}}}})}}},
                   {"finish_reason", "tool_calls"}}})}};
        json reply = proxy::translate_response(upstream_reply, mapping, policy, "client-model");
        REQUIRE(reply.at("content")[0].at("text") == "reply about /home/user/checkout/out.log");
        const auto& block = reply.at("content")[1];
        REQUIRE(block.at("type") == "tool_use");
        REQUIRE(block.at("name") == tool_case.client);
        REQUIRE(block.at("input") == tool_case.input);
    }

    // Path rewrite then its inverse is the identity on paths under either root.
    std::mt19937 rng(9);
    std::uniform_int_distribution<int> depth_dist(0, 3);
    for (int i = 0; i < 200; ++i) {
        std::string path = i % 2 ? "/home/user/checkout" : "/workspace/repo";
        int depth = depth_dist(rng);
        for (int d = 0; d < depth; ++d)
            path += "/dir" + std::to_string(rng() % 10);
        if (i % 2) {
            REQUIRE(policy.to_user(policy.to_canonical(path)) == path);
        } else {
            REQUIRE(policy.to_canonical(policy.to_user(path)) == path);
        }
    }

    // A scripted 50-delta stream arrives in order with identical text.
    proxy::StreamBridge bridge(mapping, policy, "client-model");
    std::string expected_text;
    std::vector<proxy::SseEvent> events;
    for (int i = 0; i < 50; ++i) {
        std::string piece = (i % 7 == 3) ? "/workspace/repo/chunk" + std::to_string(i) + " "
                                         : "piece" + std::to_string(i) + " ";
        expected_text += policy.to_user(piece);
        json chunk{{"id", "chatcmpl-stream"},
                   {"choices",
                    json::array({{{"index", 0}, {"delta", {{"content", piece}}}}})}};
        auto more = bridge.feed("data: " + chunk.dump() + "\n\n");
        events.insert(events.end(), more.begin(), more.end());
    }
    auto tail = bridge.feed("data: [DONE]\n\n");
    events.insert(events.end(), tail.begin(), tail.end());

    REQUIRE(events.front().event == "message_start");
    REQUIRE(events.back().event == "message_stop");
    std::string streamed_text;
    int delta_events = 0;
    for (const auto& event : events)
        if (event.event == "content_block_delta") {
            ++delta_events;
            streamed_text += event.data.at("delta").at("text").get<std::string>();
        }
    REQUIRE(streamed_text == expected_text);
    REQUIRE(delta_events >= 50 - 1); // holdback may merge across a boundary
    REQUIRE(criterion.elapsed_s() < 5.0);
}

TEST_CASE("criterion 10: end-to-end smoke through the CLI with a consistent manifest chain")
{
    Criterion criterion(10, "generate -> verify -> curate -> fit through the CLI");
    fs::path root = fresh_dir("smoke");
    fs::path generate_out = root / "gen";
    fs::path verify_out = root / "ver";
    fs::path curate_out = root / "cur";
    fs::path fit_out = root / "fit";

    json config{
        {"endpoint",
         {{"base_url", "http://mock.invalid/v1"},
          {"model_id", "mock-teacher"},
          {"mock_script", (kTestData / "mock_campaign.json").string()}}},
        {"codebases",
         json::array({{{"root", (kTestData / "fixture_repo").string()},
                       {"commit", "c0ffee42"},
                       {"repo_name", "fixture"}}})},
        {"bug_catalog", (kData / "bug_catalog.json").string()},
        {"demo_prs", (kData / "demo_prs.json").string()}};
    fs::path config_path = root / "generate.json";
    std::ofstream(config_path) << config.dump(2);

    REQUIRE(run_cli("generate --config " + config_path.string() + " --seed 11 --out "
                    + generate_out.string())
            == 0);
    REQUIRE(run_cli("verify --first " + (generate_out / "t1.jsonl").string() + " --second "
                    + (generate_out / "t2.jsonl").string() + " --out " + verify_out.string())
            == 0);
    REQUIRE(run_cli("curate --trajectories " + (generate_out / "t2.jsonl").string()
                    + " --verification " + (verify_out / "verification.jsonl").string()
                    + " --threshold 0.5 --seed 11 --out " + curate_out.string())
            == 0);
    REQUIRE(run_cli("fit --input " + (kData / "scaling_vllm.json").string() + " --out "
                    + fit_out.string() + " > " + (root / "fit_stdout.json").string())
            == 0);

    // Curate kept exactly the records with recall >= 0.5 (alpha and beta).
    auto kept = trajectory::read_trajectories_jsonl((curate_out / "train.jsonl").string());
    REQUIRE(kept.size() == 2);
    std::set<std::string> ids;
    for (const auto& t : kept)
        ids.insert(t.id);
    REQUIRE(ids.count("t2:fixture:pkg/alpha.py:4:alpha") == 1);
    REQUIRE(ids.count("t2:fixture:pkg/beta.py:4:beta") == 1);

    // Manifest chain: every stage's recorded input hash equals the producing
    // stage's recorded output hash.
    auto manifest = [](const fs::path& dir) { return json::parse(slurp(dir / "manifest.json")); };
    auto hash_map = [](const json& entries) {
        std::map<std::string, std::string> hashes;
        for (const auto& entry : entries)
            hashes[entry.at("path").get<std::string>()] = entry.at("hash").get<std::string>();
        return hashes;
    };
    json generate_manifest = manifest(generate_out);
    json verify_manifest = manifest(verify_out);
    json curate_manifest = manifest(curate_out);
    json fit_manifest = manifest(fit_out);

    auto generate_outputs = hash_map(generate_manifest.at("outputs"));
    auto verify_inputs = hash_map(verify_manifest.at("inputs"));
    auto verify_outputs = hash_map(verify_manifest.at("outputs"));
    auto curate_inputs = hash_map(curate_manifest.at("inputs"));

    std::string t1_path = (generate_out / "t1.jsonl").string();
    std::string t2_path = (generate_out / "t2.jsonl").string();
    std::string verification_path = (verify_out / "verification.jsonl").string();
    REQUIRE(verify_inputs.at(t1_path) == generate_outputs.at(t1_path));
    REQUIRE(verify_inputs.at(t2_path) == generate_outputs.at(t2_path));
    REQUIRE(curate_inputs.at(t2_path) == generate_outputs.at(t2_path));
    REQUIRE(curate_inputs.at(verification_path) == verify_outputs.at(verification_path));
    REQUIRE(generate_manifest.at("seed") == 11);
    REQUIRE(curate_manifest.at("seed") == 11);
    REQUIRE(fit_manifest.at("outputs").size() == 1);

    fs::remove_all(root);
    REQUIRE(criterion.elapsed_s() < 60.0);
}
