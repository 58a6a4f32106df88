// Copyright 2026 the trajkit authors
// SPDX-License-Identifier: Apache-2.0
//
// trajkit: two-rollout synthetic-data pipeline, soft verification, dataset
// curation, scaling/cost analysis, seed statistics, and the deployment proxy
// behind one CLI.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "trajkit/costmodel.hpp"
#include "trajkit/curation.hpp"
#include "trajkit/detrand.hpp"
#include "trajkit/orchestrate.hpp"
#include "trajkit/proxy.hpp"
#include "trajkit/scaling.hpp"
#include "trajkit/stats.hpp"
#include "trajkit/trajectory.hpp"
#include "trajkit/verification.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace trajkit;

namespace {

constexpr const char* kVersion = "0.1.0";

#ifndef TRAJKIT_DATA_DIR
#define TRAJKIT_DATA_DIR "data"
#endif

std::string slurp(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

json load_json(const fs::path& path)
{
    auto parsed = json::parse(slurp(path), nullptr, false);
    if (parsed.is_discarded())
        throw std::runtime_error("invalid JSON in " + path.string());
    return parsed;
}

std::string file_hash(const fs::path& path)
{
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(detrand::fnv1a64(slurp(path))));
    return hex;
}

// Uniform run manifest: one per subcommand invocation.
class ManifestWriter {
public:
    ManifestWriter(std::string subcommand, fs::path out_dir)
        : subcommand_(std::move(subcommand)),
          out_dir_(std::move(out_dir)),
          start_(std::chrono::steady_clock::now())
    {
        fs::create_directories(out_dir_);
    }

    void set_config(const fs::path& path) { config_hash_ = file_hash(path); }
    void set_config_text(const std::string& text)
    {
        char hex[17];
        std::snprintf(hex, sizeof hex, "%016llx",
                      static_cast<unsigned long long>(detrand::fnv1a64(text)));
        config_hash_ = hex;
    }
    void set_seed(std::uint64_t seed) { seed_ = seed; }
    void add_input(const fs::path& path)
    {
        inputs_.push_back({{"path", path.string()}, {"hash", file_hash(path)}});
    }
    void add_output(const fs::path& path)
    {
        outputs_.push_back({{"path", path.string()}, {"hash", file_hash(path)}});
    }
    void note(const std::string& key, const json& value) { extra_[key] = value; }

    void write()
    {
        auto wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - start_)
                           .count();
        json manifest{{"subcommand", subcommand_}, {"config_hash", config_hash_},
                      {"inputs", inputs_},         {"outputs", outputs_},
                      {"versions", {{"trajkit", kVersion}}}, {"wall_ms", wall_ms}};
        if (seed_)
            manifest["seed"] = *seed_;
        for (const auto& [key, value] : extra_.items())
            manifest[key] = value;
        std::ofstream out(out_dir_ / "manifest.json", std::ios::trunc);
        out << manifest.dump(2) << "\n";
    }

private:
    std::string subcommand_;
    fs::path out_dir_;
    std::chrono::steady_clock::time_point start_;
    std::string config_hash_ = "none";
    std::optional<std::uint64_t> seed_;
    json inputs_ = json::array();
    json outputs_ = json::array();
    json extra_ = json::object();
};

std::vector<scaling::CostPerfPoint> load_fit_points(const fs::path& path)
{
    std::vector<scaling::CostPerfPoint> points;
    if (path.extension() == ".csv") {
        std::ifstream in(path);
        if (!in)
            throw std::runtime_error("cannot open " + path.string());
        std::string line;
        bool header = true;
        while (std::getline(in, line)) {
            if (line.empty())
                continue;
            if (header) { // samples,cost_usd,seed1,seed2,...
                header = false;
                continue;
            }
            std::vector<double> cells;
            std::stringstream row(line);
            std::string cell;
            while (std::getline(row, cell, ','))
                cells.push_back(std::stod(cell));
            if (cells.size() < 3)
                throw std::runtime_error("csv row needs samples,cost_usd and seed columns");
            stats::SeedGroup group{"row", {cells.begin() + 2, cells.end()}};
            auto summary = stats::summarize(group);
            points.push_back({cells[1] / 1000.0, summary.mean,
                              summary.n > 1 ? std::optional<double>(summary.std) : std::nullopt,
                              static_cast<int>(summary.n)});
        }
        return points;
    }

    json fixture = load_json(path);
    double per_sample = fixture.value("per_sample_cost_usd", 0.0);
    for (const auto& row : fixture.at("rows")) {
        double cost_usd = row.contains("cost_usd")
            ? row.at("cost_usd").get<double>()
            : row.at("samples").get<double>() * per_sample;
        std::vector<double> seeds;
        for (const auto& seed_value : row.at("seeds"))
            seeds.push_back(seed_value.get<double>());
        auto summary = stats::summarize({"row", seeds});
        points.push_back({cost_usd / 1000.0, summary.mean,
                          summary.n > 1 ? std::optional<double>(summary.std) : std::nullopt,
                          static_cast<int>(summary.n)});
    }
    return points;
}

json fit_report(const scaling::ScalingFit& fit, std::size_t n_points)
{
    return {{"asymptote_pct", fit.asymptote_pct},
            {"coefficient", fit.coefficient},
            {"exponent", fit.exponent},
            {"r_squared", fit.r_squared},
            {"mean_abs_error", fit.mean_abs_error},
            {"residual_sum", fit.residual_sum},
            {"ridge_guarded", fit.ridge_guarded},
            {"n_points", n_points}};
}

std::string money(double dollars, int decimals = 4)
{
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "$%.*f", decimals, dollars);
    return buffer;
}

int run_generate(const fs::path& config_path, const std::optional<std::string>& out,
                 std::optional<std::uint64_t> seed, std::optional<int> workers)
{
    json config_json = load_json(config_path);
    orchestrate::OrchestratorConfig config = orchestrate::OrchestratorConfig::from_json(config_json);
    if (out)
        config.out_dir = *out;
    if (seed)
        config.seed = *seed;
    if (workers)
        config.workers = *workers;
    if (config.out_dir.empty())
        throw std::runtime_error("generate needs an output directory (config out_dir or --out)");
    if (config.endpoint.api_key.empty())
        if (const char* key = std::getenv("TRAJKIT_API_KEY"))
            config.endpoint.api_key = key;

    ManifestWriter manifest("generate", config.out_dir);
    manifest.set_config(config_path);
    manifest.set_seed(config.seed);
    manifest.add_input(config.bug_catalog_path);
    manifest.add_input(config.demo_prs_path);

    std::shared_ptr<chat::ChatEndpoint> endpoint;
    if (!config.endpoint.mock_script.empty())
        endpoint = chat::ScriptedEndpoint::from_file(config.endpoint.mock_script);
    orchestrate::CampaignStats stats = orchestrate::run_campaign(config, endpoint);

    for (const char* shard : {"t1.jsonl", "t2.jsonl", "synthetic_prs.jsonl",
                              "verification.jsonl", "rejections.jsonl"})
        manifest.add_output(config.out_dir / shard);
    manifest.note("accepted", stats.accepted);
    manifest.note("rejected", stats.rejected);
    manifest.note("failed", stats.failed);
    manifest.write();

    std::cout << "generate: " << stats.accepted << " accepted, " << stats.rejected
              << " rejected, " << stats.failed << " failed (of " << stats.functions_total
              << " functions) -> " << config.out_dir.string() << "\n";
    return stats.failed == 0 ? 0 : 1;
}

int run_verify(const fs::path& first_path, const fs::path& second_path, const fs::path& out_dir,
               double threshold, const std::string& identity)
{
    auto mode = identity == "path_agnostic" ? patchdiff::IdentityMode::PathAgnostic
                                            : patchdiff::IdentityMode::WithPath;
    auto first = trajectory::read_trajectories_jsonl(first_path.string());
    auto second = trajectory::read_trajectories_jsonl(second_path.string());

    std::map<std::string, const trajectory::Trajectory*> first_by_function;
    for (const auto& t : first)
        if (t.metadata.function_ref)
            first_by_function[*t.metadata.function_ref] = &t;

    ManifestWriter manifest("verify", out_dir);
    manifest.set_config_text(first_path.string() + "|" + second_path.string());
    manifest.add_input(first_path);
    manifest.add_input(second_path);

    std::vector<verification::VerificationRecord> records;
    std::size_t unmatched = 0;
    for (const auto& t2 : second) {
        const trajectory::Trajectory* t1 = nullptr;
        if (t2.metadata.function_ref) {
            auto it = first_by_function.find(*t2.metadata.function_ref);
            if (it != first_by_function.end())
                t1 = it->second;
        }
        if (!t1) {
            ++unmatched;
            continue;
        }
        records.push_back(verification::verify_pair(*t1, t2, mode));
    }
    auto kept = verification::filter_at_least(records, threshold);
    fs::create_directories(out_dir);
    verification::write_verification_jsonl((out_dir / "verification.jsonl").string(), kept);

    std::size_t hard = 0, soft = 0, unverified = 0;
    for (const auto& record : kept) {
        hard += record.bucket == verification::Bucket::Hard;
        soft += record.bucket == verification::Bucket::Soft;
        unverified += record.bucket == verification::Bucket::Unverified;
    }
    manifest.add_output(out_dir / "verification.jsonl");
    manifest.note("pairs", records.size());
    manifest.note("unmatched_second_rollouts", unmatched);
    manifest.note("threshold", threshold);
    manifest.write();
    std::cout << "verify: " << kept.size() << " records (hard " << hard << ", soft " << soft
              << ", unverified " << unverified << ") -> " << (out_dir / "verification.jsonl").string()
              << "\n";
    return 0;
}

struct CurateOptions {
    fs::path trajectories;
    std::optional<fs::path> verification;
    double threshold = 0.0;
    bool dedup = false;
    std::optional<std::size_t> max_patch_lines;
    std::optional<double> max_tool_tokens;
    std::size_t limit = 32768;
    std::optional<std::size_t> select_target;
    double min_ratio = 0.88;
    bool select = false;
    std::optional<std::size_t> partition_size;
    std::optional<fs::path> mix_config;
    fs::path out_dir;
    std::uint64_t seed = 0;
    bool strip_reasoning = false;
};

int run_curate(const CurateOptions& options)
{
    ManifestWriter manifest("curate", options.out_dir);
    manifest.set_seed(options.seed);
    auto counter = trajectory::default_token_counter();

    std::vector<trajectory::Trajectory> records;
    json stages = json::array();

    if (options.mix_config) {
        json mix_json = load_json(*options.mix_config);
        manifest.set_config(*options.mix_config);
        curation::DatasetSpec spec;
        spec.target_size = mix_json.at("target_size").get<std::size_t>();
        spec.seed = options.seed;
        for (const auto& source : mix_json.at("sources")) {
            fs::path path = source.at("path").get<std::string>();
            manifest.add_input(path);
            spec.sources.push_back({source.at("label").get<std::string>(),
                                    trajectory::read_trajectories_jsonl(path.string())});
        }
        for (const auto& share : mix_json.at("mix"))
            spec.mix.push_back({share.at("label").get<std::string>(),
                                share.at("proportion").get<double>()});
        records = curation::mix(spec);
        stages.push_back({{"stage", "mix"}, {"count", records.size()}});
    } else {
        manifest.set_config_text(options.trajectories.string());
        manifest.add_input(options.trajectories);
        records = trajectory::read_trajectories_jsonl(options.trajectories.string());
        stages.push_back({{"stage", "load"}, {"count", records.size()}});
    }

    if (options.verification) {
        manifest.add_input(*options.verification);
        auto verdicts = verification::read_verification_jsonl(options.verification->string());
        auto kept = verification::filter_at_least(verdicts, options.threshold);
        std::set<std::string> keep_ids;
        for (const auto& record : kept)
            keep_ids.insert(record.trajectory_id);
        std::vector<trajectory::Trajectory> filtered;
        for (auto& t : records)
            if (keep_ids.count(t.id))
                filtered.push_back(std::move(t));
        records = std::move(filtered);
        stages.push_back({{"stage", "verification_threshold"},
                          {"threshold", options.threshold},
                          {"count", records.size()}});
    }
    if (options.dedup) {
        records = curation::dedup_by_patch(records);
        stages.push_back({{"stage", "dedup_by_patch"}, {"count", records.size()}});
    }
    if (options.max_patch_lines) {
        records = curation::filter_patch_lines(records, *options.max_patch_lines);
        stages.push_back({{"stage", "filter_patch_lines"},
                          {"max_lines", *options.max_patch_lines},
                          {"count", records.size()}});
    }
    if (options.max_tool_tokens) {
        records = curation::filter_tool_output(records, *options.max_tool_tokens, counter);
        stages.push_back({{"stage", "filter_tool_output"},
                          {"max_mean_tokens", *options.max_tool_tokens},
                          {"count", records.size()}});
    }
    if (options.strip_reasoning) {
        for (auto& t : records)
            t = trajectory::strip_reasoning(t);
        stages.push_back({{"stage", "strip_reasoning"}, {"count", records.size()}});
    }

    fs::create_directories(options.out_dir);
    if (options.partition_size) {
        auto ordered = curation::order_by_truncation_ratio(records, options.limit, counter);
        auto partitions = curation::partition_fixed(ordered, *options.partition_size);
        json partition_files = json::array();
        for (std::size_t i = 0; i < partitions.size(); ++i) {
            char name[32];
            std::snprintf(name, sizeof name, "part%03zu.jsonl", i);
            fs::path path = options.out_dir / name;
            trajectory::write_trajectories_jsonl(path.string(), partitions[i]);
            manifest.add_output(path);
            partition_files.push_back(name);
        }
        stages.push_back({{"stage", "partition_fixed"},
                          {"size", *options.partition_size},
                          {"partitions", partitions.size()},
                          {"dropped", records.size() - partitions.size() * *options.partition_size}});
        manifest.note("partitions", partition_files);
    } else {
        if (options.select) {
            auto selection = curation::select_ordered_truncated(
                records, options.limit, counter, options.min_ratio,
                options.select_target.value_or(SIZE_MAX));
            records = std::move(selection.records);
            const char* stop = selection.stop == curation::SelectionStop::TargetReached
                ? "target_reached"
                : selection.stop == curation::SelectionStop::RatioFloor ? "ratio_floor"
                                                                        : "exhausted";
            stages.push_back({{"stage", "select_ordered_truncated"},
                              {"limit", options.limit},
                              {"min_ratio", options.min_ratio},
                              {"stop_reason", stop},
                              {"count", records.size()}});
        }
        fs::path train = options.out_dir / "train.jsonl";
        trajectory::write_trajectories_jsonl(train.string(), records);
        manifest.add_output(train);
    }
    manifest.note("stages", stages);
    manifest.write();
    std::cout << "curate: " << records.size() << " records -> " << options.out_dir.string()
              << "\n";
    return 0;
}

int run_fit(const fs::path& input, const std::optional<fs::path>& out_dir, bool weighted,
            double b_min, double b_max, int grid, const std::vector<double>& targets,
            const std::string& format)
{
    auto points = load_fit_points(input);
    scaling::FitOptions options;
    options.weight_by_variance = weighted;
    options.b_min = b_min;
    options.b_max = b_max;
    options.grid_size = grid;
    scaling::ScalingFit fit = scaling::fit_power_law(points, options);

    json report = fit_report(fit, points.size());
    json inversions = json::array();
    for (double target : targets)
        inversions.push_back({{"target_pct", target},
                              {"cost_usd", costmodel::cost_to_match(fit, target)}});
    if (!inversions.empty())
        report["inversions"] = inversions;

    if (format == "table") {
        std::printf("power-law fit over %zu points: y = c - a * x^-b\n", points.size());
        std::printf("  c (asymptote)   %10.4f %%\n", fit.asymptote_pct);
        std::printf("  a (coefficient) %10.4f\n", fit.coefficient);
        std::printf("  b (exponent)    %10.6f\n", fit.exponent);
        std::printf("  R^2             %10.4f\n", fit.r_squared);
        std::printf("  mean |error|    %10.4f %%\n", fit.mean_abs_error);
        if (fit.ridge_guarded)
            std::printf("  (asymptote from the conservative 1-SE selection)\n");
        for (const auto& inv : inversions)
            std::printf("  cost to reach %.2f%%: %s\n", inv.at("target_pct").get<double>(),
                        money(inv.at("cost_usd").get<double>(), 0).c_str());
    } else {
        std::cout << report.dump(2) << "\n";
    }

    if (out_dir) {
        ManifestWriter manifest("fit", *out_dir);
        manifest.set_config_text(input.string());
        manifest.add_input(input);
        std::ofstream report_out(*out_dir / "fit.json", std::ios::trunc);
        report_out << report.dump(2) << "\n";
        report_out.close();
        manifest.add_output(*out_dir / "fit.json");
        manifest.write();
    }
    return 0;
}

int run_cost(const fs::path& model_path, std::size_t campaign_n,
             const std::optional<fs::path>& fit_input, const std::vector<double>& targets,
             const std::string& format, const std::optional<fs::path>& out_dir)
{
    json model = load_json(model_path);
    std::map<std::string, costmodel::PricingProfile> pricing;
    for (const auto& p : model.at("pricing_profiles"))
        pricing[p.at("name").get<std::string>()] = costmodel::pricing_from_json(p);
    std::map<std::string, costmodel::TokenUsageProfile> usage;
    for (const auto& u : model.at("usage_profiles"))
        usage[u.at("name").get<std::string>()] = costmodel::usage_from_json(u);

    json rows = json::array();
    for (const auto& configuration : model.at("configurations")) {
        std::string name = configuration.at("name").get<std::string>();
        auto breakdown = costmodel::trajectory_cost(
            usage.at(configuration.at("usage").get<std::string>()),
            pricing.at(configuration.at("pricing").get<std::string>()));
        json row{{"configuration", name},
                 {"cached", breakdown.cached},
                 {"new_input", breakdown.new_input},
                 {"output", breakdown.output},
                 {"issue", breakdown.issue},
                 {"inference_subtotal", breakdown.inference_subtotal},
                 {"training", breakdown.training},
                 {"total", breakdown.total}};
        if (campaign_n > 0)
            row["campaign_total"] = costmodel::campaign_cost(campaign_n, breakdown);
        rows.push_back(std::move(row));
    }

    json report{{"configurations", rows}};
    if (fit_input && !targets.empty()) {
        auto fit = scaling::fit_power_law(load_fit_points(*fit_input));
        json matches = json::array();
        for (double target : targets)
            matches.push_back({{"target_pct", target},
                               {"cost_usd", costmodel::cost_to_match(fit, target)}});
        report["cost_to_match"] = matches;
    }

    if (format == "table") {
        std::printf("%-28s %9s %9s %9s %9s %11s %9s %9s\n", "configuration", "cached", "new_in",
                    "output", "issue", "inference", "training", "total");
        for (const auto& row : rows) {
            std::printf("%-28s %9s %9s %9s %9s %11s %9s %9s\n",
                        row.at("configuration").get<std::string>().c_str(),
                        money(row.at("cached").get<double>()).c_str(),
                        money(row.at("new_input").get<double>()).c_str(),
                        money(row.at("output").get<double>()).c_str(),
                        money(row.at("issue").get<double>()).c_str(),
                        money(row.at("inference_subtotal").get<double>()).c_str(),
                        money(row.at("training").get<double>()).c_str(),
                        money(row.at("total").get<double>()).c_str());
            if (campaign_n > 0)
                std::printf("%-28s   campaign of %zu: %s\n", "",
                            campaign_n, money(row.at("campaign_total").get<double>(), 2).c_str());
        }
        if (report.contains("cost_to_match"))
            for (const auto& match : report.at("cost_to_match"))
                std::printf("cost to reach %.2f%%: %s\n", match.at("target_pct").get<double>(),
                            money(match.at("cost_usd").get<double>(), 0).c_str());
    } else if (format == "csv") {
        std::printf("configuration,cached,new_input,output,issue,inference_subtotal,training,total\n");
        for (const auto& row : rows)
            std::printf("%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                        row.at("configuration").get<std::string>().c_str(),
                        row.at("cached").get<double>(), row.at("new_input").get<double>(),
                        row.at("output").get<double>(), row.at("issue").get<double>(),
                        row.at("inference_subtotal").get<double>(),
                        row.at("training").get<double>(), row.at("total").get<double>());
    } else {
        std::cout << report.dump(2) << "\n";
    }

    if (out_dir) {
        ManifestWriter manifest("cost", *out_dir);
        manifest.set_config(model_path);
        manifest.add_input(model_path);
        std::ofstream report_out(*out_dir / "cost.json", std::ios::trunc);
        report_out << report.dump(2) << "\n";
        report_out.close();
        manifest.add_output(*out_dir / "cost.json");
        manifest.write();
    }
    return 0;
}

int run_stats(const fs::path& groups_path, const std::string& format,
              const std::optional<fs::path>& out_dir)
{
    json input = load_json(groups_path);
    std::map<std::string, stats::SeedGroup> groups;
    for (const auto& [label, values] : input.at("groups").items()) {
        stats::SeedGroup group{label, {}};
        for (const auto& value : values)
            group.values.push_back(value.get<double>());
        groups[label] = std::move(group);
    }

    std::vector<std::pair<std::string, std::string>> pairs;
    if (input.contains("pairs")) {
        for (const auto& pair : input.at("pairs"))
            pairs.push_back({pair.at(0).get<std::string>(), pair.at(1).get<std::string>()});
    } else {
        for (auto a = groups.begin(); a != groups.end(); ++a)
            for (auto b = std::next(a); b != groups.end(); ++b)
                pairs.push_back({a->first, b->first});
    }

    json summaries = json::object();
    for (const auto& [label, group] : groups) {
        auto summary = stats::summarize(group);
        summaries[label] = {{"mean", summary.mean}, {"std", summary.std}, {"n", summary.n}};
    }

    json comparisons = json::array();
    for (const auto& [a_label, b_label] : pairs) {
        const auto& a = groups.at(a_label);
        const auto& b = groups.at(b_label);
        double snr_value = stats::snr(a, b);
        auto sa = stats::summarize(a);
        auto sb = stats::summarize(b);
        double effect = std::abs(sa.mean - sb.mean);
        double pooled = std::sqrt((sa.std * sa.std + sb.std * sb.std) / 2.0);
        json comparison{{"a", a_label},
                        {"b", b_label},
                        {"effect_pct", effect},
                        {"snr", std::isinf(snr_value) ? json("inf") : json(snr_value)},
                        {"tier", std::string(stats::tier_name(stats::confidence_tier(
                                     std::isinf(snr_value) ? 1e9 : snr_value)))}};
        if (effect > 0.0 && pooled > 0.0)
            comparison["seeds_for_snr2"] = stats::seeds_required(effect, pooled);
        comparisons.push_back(std::move(comparison));
    }

    json report{{"groups", summaries}, {"comparisons", comparisons}};
    if (format == "table") {
        std::printf("%-32s %8s %8s %4s\n", "group", "mean", "std", "n");
        for (const auto& [label, summary] : summaries.items())
            std::printf("%-32s %8.2f %8.2f %4d\n", label.c_str(),
                        summary.at("mean").get<double>(), summary.at("std").get<double>(),
                        summary.at("n").get<int>());
        std::printf("\n%-28s vs %-28s %8s %8s %12s %6s\n", "a", "b", "effect", "snr", "tier",
                    "seeds");
        for (const auto& comparison : comparisons) {
            std::string snr_text = comparison.at("snr").is_string()
                ? comparison.at("snr").get<std::string>()
                : [&] {
                      char buffer[32];
                      std::snprintf(buffer, sizeof buffer, "%.2f",
                                    comparison.at("snr").get<double>());
                      return std::string(buffer);
                  }();
            std::printf("%-28s vs %-28s %8.2f %8s %12s %6s\n",
                        comparison.at("a").get<std::string>().c_str(),
                        comparison.at("b").get<std::string>().c_str(),
                        comparison.at("effect_pct").get<double>(), snr_text.c_str(),
                        comparison.at("tier").get<std::string>().c_str(),
                        comparison.contains("seeds_for_snr2")
                            ? std::to_string(comparison.at("seeds_for_snr2").get<std::size_t>())
                                  .c_str()
                            : "-");
        }
    } else {
        std::cout << report.dump(2) << "\n";
    }

    if (out_dir) {
        ManifestWriter manifest("stats", *out_dir);
        manifest.set_config(groups_path);
        manifest.add_input(groups_path);
        std::ofstream report_out(*out_dir / "stats.json", std::ios::trunc);
        report_out << report.dump(2) << "\n";
        report_out.close();
        manifest.add_output(*out_dir / "stats.json");
        manifest.write();
    }
    return 0;
}

int run_serve(const fs::path& config_path)
{
    proxy::ProxyConfig config = proxy::ProxyConfig::from_json(load_json(config_path));
    proxy::ProxyServer server(config);
    int port = server.start();
    std::cout << "proxy listening on " << config.listen_host << ":" << port << " -> "
              << config.upstream_base_url << "\n"
              << "canonical_root=" << config.canonical_root << " user_root=" << config.user_root
              << "\n";
    // Serve until interrupted.
    for (;;)
        std::this_thread::sleep_for(std::chrono::seconds(3600));
    return 0;
}

int run_plot_data(const std::string& kind, const std::optional<fs::path>& input,
                  const fs::path& out_dir, std::size_t limit, std::size_t partition_size)
{
    fs::create_directories(out_dir);
    ManifestWriter manifest("plot-data", out_dir);

    if (kind == "scaling") {
        if (!input)
            throw std::runtime_error("plot-data scaling needs --input");
        manifest.set_config_text(input->string());
        manifest.add_input(*input);
        auto points = load_fit_points(*input);
        auto fit = scaling::fit_power_law(points);
        fs::path csv_path = out_dir / "scaling.csv";
        std::ofstream csv(csv_path, std::ios::trunc);
        csv << "kind,x_kusd,y_pct\n";
        for (const auto& point : points) {
            char row[96];
            std::snprintf(row, sizeof row, "point,%.6g,%.6g\n", point.cost_kusd,
                          point.resolve_pct);
            csv << row;
        }
        double x_min = points.front().cost_kusd;
        double x_max = points.front().cost_kusd;
        for (const auto& point : points) {
            x_min = std::min(x_min, point.cost_kusd);
            x_max = std::max(x_max, point.cost_kusd);
        }
        constexpr int kCurveSamples = 100;
        for (int i = 0; i < kCurveSamples; ++i) {
            double x = x_min
                * std::pow(x_max / x_min,
                           static_cast<double>(i) / static_cast<double>(kCurveSamples - 1));
            char row[96];
            std::snprintf(row, sizeof row, "curve,%.6g,%.6g\n", x, scaling::predict(fit, x));
            csv << row;
        }
        csv.close();
        manifest.add_output(csv_path);
        manifest.write();
        std::cout << "plot-data: wrote " << csv_path.string() << "\n";
        return 0;
    }
    if (kind == "verification") {
        if (!input)
            throw std::runtime_error("plot-data verification needs --input");
        manifest.set_config_text(input->string());
        manifest.add_input(*input);
        auto records = verification::read_verification_jsonl(input->string());
        auto groups = verification::bucket_by_thresholds(records, {0.0, 0.25, 0.5, 0.75, 1.0});
        fs::path csv_path = out_dir / "verification.csv";
        std::ofstream csv(csv_path, std::ios::trunc);
        csv << "bucket_lo,bucket_hi,closed,count\n";
        for (const auto& group : groups) {
            char row[96];
            std::snprintf(row, sizeof row, "%.2f,%.2f,%d,%zu\n", group.lo, group.hi,
                          group.closed ? 1 : 0, group.records.size());
            csv << row;
        }
        csv.close();
        manifest.add_output(csv_path);
        manifest.write();
        std::cout << "plot-data: wrote " << csv_path.string() << "\n";
        return 0;
    }
    if (kind == "truncation") {
        if (!input)
            throw std::runtime_error("plot-data truncation needs --input");
        manifest.set_config_text(input->string());
        manifest.add_input(*input);
        auto counter = trajectory::default_token_counter();
        auto records = trajectory::read_trajectories_jsonl(input->string());
        auto ordered = curation::order_by_truncation_ratio(records, limit, counter);
        auto partitions = curation::partition_fixed(ordered, partition_size);
        fs::path csv_path = out_dir / "truncation.csv";
        std::ofstream csv(csv_path, std::ios::trunc);
        csv << "partition,count,mean_ratio,min_ratio,max_ratio\n";
        for (std::size_t i = 0; i < partitions.size(); ++i) {
            double sum = 0.0, lo = 2.0, hi = -1.0;
            for (const auto& t : partitions[i]) {
                double ratio = trajectory::truncation_ratio(t, limit, counter);
                sum += ratio;
                lo = std::min(lo, ratio);
                hi = std::max(hi, ratio);
            }
            char row[128];
            std::snprintf(row, sizeof row, "%zu,%zu,%.6g,%.6g,%.6g\n", i, partitions[i].size(),
                          sum / static_cast<double>(partitions[i].size()), lo, hi);
            csv << row;
        }
        csv.close();
        manifest.add_output(csv_path);
        manifest.write();
        std::cout << "plot-data: wrote " << csv_path.string() << "\n";
        return 0;
    }
    throw std::runtime_error("unknown plot kind: " + kind);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"two-rollout synthetic coding-agent data toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    // generate
    auto* generate = app.add_subcommand("generate", "run the two-rollout generation campaign");
    std::string generate_config;
    std::string generate_out;
    std::uint64_t generate_seed = 0;
    int generate_workers = 0;
    generate->add_option("--config", generate_config, "campaign config JSON")->required();
    generate->add_option("--out", generate_out, "output directory");
    generate->add_option("--seed", generate_seed, "campaign seed")->required();
    generate->add_option("--workers", generate_workers, "worker count");

    // verify
    auto* verify = app.add_subcommand("verify", "soft-verify a first/second rollout shard pair");
    std::string verify_first, verify_second, verify_out;
    double verify_threshold = 0.0;
    std::string verify_identity = "with_path";
    verify->add_option("--first", verify_first, "first-rollout JSONL shard")->required();
    verify->add_option("--second", verify_second, "second-rollout JSONL shard")->required();
    verify->add_option("--out", verify_out, "output directory")->required();
    verify->add_option("--threshold", verify_threshold, "keep records with recall >= threshold");
    verify->add_option("--identity", verify_identity, "line identity: with_path|path_agnostic")
        ->check(CLI::IsMember({"with_path", "path_agnostic"}));

    // curate
    auto* curate = app.add_subcommand("curate", "filter/order/select/mix trajectories");
    CurateOptions curate_options;
    std::string curate_trajectories, curate_verification, curate_mix, curate_out;
    curate->add_option("--trajectories", curate_trajectories, "input JSONL shard");
    curate->add_option("--verification", curate_verification, "verification JSONL shard");
    curate->add_option("--threshold", curate_options.threshold, "minimum recall to keep");
    curate->add_flag("--dedup", curate_options.dedup, "drop duplicate patches");
    std::size_t curate_max_patch_lines = 0;
    double curate_max_tool_tokens = 0.0;
    auto* patch_lines_opt = curate->add_option("--max-patch-lines", curate_max_patch_lines,
                                               "drop records with larger patches");
    auto* tool_tokens_opt = curate->add_option("--max-tool-tokens", curate_max_tool_tokens,
                                               "drop records with larger mean tool output");
    curate->add_option("--limit", curate_options.limit, "context limit in tokens (default 32768)");
    std::size_t curate_target = 0;
    auto* target_opt = curate->add_option("--select-target", curate_target,
                                          "select this many records, truncating over-long ones");
    curate->add_flag("--select", curate_options.select,
                     "select by descending truncation ratio down to --min-ratio");
    curate->add_option("--min-ratio", curate_options.min_ratio,
                       "truncation-ratio floor for --select (default 0.88)");
    std::size_t curate_partition = 0;
    auto* partition_opt = curate->add_option("--partition-size", curate_partition,
                                             "write fixed-size partitions instead of train.jsonl");
    curate->add_option("--mix-config", curate_mix, "dataset mix spec JSON");
    curate->add_flag("--strip-reasoning", curate_options.strip_reasoning,
                     "remove assistant reasoning traces");
    curate->add_option("--out", curate_out, "output directory")->required();
    curate->add_option("--seed", curate_options.seed, "sampling seed")->required();

    // fit
    auto* fit = app.add_subcommand("fit", "fit the cost-performance power law");
    std::string fit_input, fit_out, fit_format = "json";
    bool fit_weighted = false;
    double fit_b_min = 0.01, fit_b_max = 3.0;
    int fit_grid = 2000;
    std::vector<double> fit_targets;
    fit->add_option("--input", fit_input, "CSV or JSON cost/performance table")->required();
    fit->add_option("--out", fit_out, "output directory for fit.json + manifest");
    fit->add_flag("--weighted", fit_weighted, "weight rows by 1/std^2");
    fit->add_option("--b-min", fit_b_min, "exponent search floor");
    fit->add_option("--b-max", fit_b_max, "exponent search ceiling");
    fit->add_option("--grid", fit_grid, "exponent grid size (>= 1000 recommended)");
    fit->add_option("--invert", fit_targets, "target resolve rates to invert into costs");
    fit->add_option("--format", fit_format, "json|table")
        ->check(CLI::IsMember({"json", "table"}));

    // cost
    auto* cost = app.add_subcommand("cost", "per-trajectory and campaign cost model");
    std::string cost_model = std::string(TRAJKIT_DATA_DIR) + "/cost_model.json";
    std::string cost_fit_input, cost_out, cost_format = "table";
    std::size_t cost_n = 0;
    std::vector<double> cost_targets;
    cost->add_option("--model", cost_model, "pricing/usage model JSON");
    cost->add_option("--n", cost_n, "campaign size in trajectories");
    cost->add_option("--fit-input", cost_fit_input, "scaling table for cost-to-match");
    cost->add_option("--target", cost_targets, "resolve-rate targets for cost-to-match");
    cost->add_option("--format", cost_format, "table|json|csv")
        ->check(CLI::IsMember({"table", "json", "csv"}));
    cost->add_option("--out", cost_out, "output directory for cost.json + manifest");

    // stats
    auto* stats_cmd = app.add_subcommand("stats", "seed-group statistics and SNR report");
    std::string stats_groups = std::string(TRAJKIT_DATA_DIR) + "/seed_groups.json";
    std::string stats_format = "table", stats_out;
    stats_cmd->add_option("--groups", stats_groups, "labeled seed groups JSON");
    stats_cmd->add_option("--format", stats_format, "table|json")
        ->check(CLI::IsMember({"table", "json"}));
    stats_cmd->add_option("--out", stats_out, "output directory for stats.json + manifest");

    // serve
    auto* serve = app.add_subcommand("serve", "run the API-translation proxy");
    std::string serve_config;
    serve->add_option("--config", serve_config, "proxy config JSON")->required();

    // plot-data
    auto* plot = app.add_subcommand("plot-data", "emit CSV series for the standard figures");
    std::string plot_kind, plot_input, plot_out;
    std::size_t plot_limit = 32768, plot_partition = 3000;
    plot->add_option("--kind", plot_kind, "scaling|verification|truncation")
        ->required()
        ->check(CLI::IsMember({"scaling", "verification", "truncation"}));
    plot->add_option("--input", plot_input, "input table/shard for the series");
    plot->add_option("--limit", plot_limit, "context limit for truncation ratios");
    plot->add_option("--partition-size", plot_partition, "partition size for the truncation curve");
    plot->add_option("--out", plot_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        std::cout << kVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (generate->parsed())
            return run_generate(generate_config,
                                generate_out.empty() ? std::nullopt
                                                     : std::optional<std::string>(generate_out),
                                generate_seed,
                                generate_workers > 0 ? std::optional<int>(generate_workers)
                                                     : std::nullopt);
        if (verify->parsed())
            return run_verify(verify_first, verify_second, verify_out, verify_threshold,
                              verify_identity);
        if (curate->parsed()) {
            curate_options.trajectories = curate_trajectories;
            if (!curate_verification.empty())
                curate_options.verification = curate_verification;
            if (*patch_lines_opt)
                curate_options.max_patch_lines = curate_max_patch_lines;
            if (*tool_tokens_opt)
                curate_options.max_tool_tokens = curate_max_tool_tokens;
            if (*target_opt) {
                curate_options.select_target = curate_target;
                curate_options.select = true;
            }
            if (*partition_opt)
                curate_options.partition_size = curate_partition;
            if (!curate_mix.empty())
                curate_options.mix_config = curate_mix;
            if (curate_options.trajectories.empty() && !curate_options.mix_config)
                throw std::runtime_error("curate needs --trajectories or --mix-config");
            curate_options.out_dir = curate_out;
            return run_curate(curate_options);
        }
        if (fit->parsed())
            return run_fit(fit_input,
                           fit_out.empty() ? std::nullopt : std::optional<fs::path>(fit_out),
                           fit_weighted, fit_b_min, fit_b_max, fit_grid, fit_targets, fit_format);
        if (cost->parsed())
            return run_cost(cost_model, cost_n,
                            cost_fit_input.empty() ? std::nullopt
                                                   : std::optional<fs::path>(cost_fit_input),
                            cost_targets, cost_format,
                            cost_out.empty() ? std::nullopt : std::optional<fs::path>(cost_out));
        if (stats_cmd->parsed())
            return run_stats(stats_groups, stats_format,
                             stats_out.empty() ? std::nullopt : std::optional<fs::path>(stats_out));
        if (serve->parsed())
            return run_serve(serve_config);
        if (plot->parsed())
            return run_plot_data(plot_kind,
                                 plot_input.empty() ? std::nullopt
                                                    : std::optional<fs::path>(plot_input),
                                 plot_out, plot_limit, plot_partition);
    } catch (const std::exception& e) {
        json error{{"error", {{"type", "runtime_error"}, {"message", e.what()}}}};
        std::cerr << error.dump() << "\n";
        return 1;
    }
    return 0;
}
