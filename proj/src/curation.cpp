// Copyright 2026 the trajkit authors
// SPDX-License-Identifier: Apache-2.0

#include "trajkit/curation.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <unordered_map>

#include "trajkit/detrand.hpp"
#include "trajkit/patchdiff.hpp"

namespace trajkit::curation {

std::vector<Trajectory> filter_patch_lines(const std::vector<Trajectory>& records,
                                           std::size_t max_lines)
{
    std::vector<Trajectory> out;
    for (const Trajectory& record : records) {
        if (!record.patch)
            throw std::invalid_argument("filter_patch_lines: record '" + record.id
                                        + "' carries no patch");
        auto patch = patchdiff::parse_unified_diff(*record.patch);
        if (patchdiff::patch_total_lines(patch) <= max_lines)
            out.push_back(record);
    }
    return out;
}

std::vector<Trajectory> filter_tool_output(const std::vector<Trajectory>& records,
                                           double max_mean_tokens, const TokenCounter& counter)
{
    std::vector<Trajectory> out;
    for (const Trajectory& record : records)
        if (trajectory::mean_tool_output_tokens(record, counter) <= max_mean_tokens)
            out.push_back(record);
    return out;
}

std::vector<Trajectory> order_by_truncation_ratio(const std::vector<Trajectory>& records,
                                                  std::size_t limit, const TokenCounter& counter)
{
    std::vector<std::pair<double, const Trajectory*>> keyed;
    keyed.reserve(records.size());
    for (const Trajectory& record : records)
        keyed.push_back({trajectory::truncation_ratio(record, limit, counter), &record});
    std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first)
            return a.first > b.first;
        return a.second->id < b.second->id;
    });
    std::vector<Trajectory> out;
    out.reserve(records.size());
    for (const auto& [ratio, record] : keyed)
        out.push_back(*record);
    return out;
}

std::vector<std::vector<Trajectory>> partition_fixed(const std::vector<Trajectory>& ordered,
                                                     std::size_t size)
{
    if (size == 0)
        throw std::invalid_argument("partition_fixed: size must be positive");
    std::vector<std::vector<Trajectory>> partitions;
    if (ordered.size() < size) {
        std::cerr << "warning: partition_fixed: input of " << ordered.size()
                  << " records is shorter than the partition size " << size << "\n";
        return partitions;
    }
    for (std::size_t begin = 0; begin + size <= ordered.size(); begin += size)
        partitions.emplace_back(ordered.begin() + static_cast<std::ptrdiff_t>(begin),
                                ordered.begin() + static_cast<std::ptrdiff_t>(begin + size));
    return partitions;
}

SelectionResult select_ordered_truncated(const std::vector<Trajectory>& records, std::size_t limit,
                                         const TokenCounter& counter, double min_ratio,
                                         std::size_t target)
{
    if (min_ratio <= 0.0 || min_ratio > 1.0)
        throw std::invalid_argument("select_ordered_truncated: min_ratio must lie in (0,1]");
    SelectionResult result;
    for (const Trajectory& record : order_by_truncation_ratio(records, limit, counter)) {
        if (result.records.size() >= target) {
            result.stop = SelectionStop::TargetReached;
            return result;
        }
        double ratio = trajectory::truncation_ratio(record, limit, counter);
        if (ratio < min_ratio) {
            result.stop = SelectionStop::RatioFloor;
            return result;
        }
        result.records.push_back(ratio < 1.0 ? trajectory::truncate(record, limit, counter) : record);
    }
    result.stop = result.records.size() >= target ? SelectionStop::TargetReached
                                                  : SelectionStop::Exhausted;
    return result;
}

std::vector<Trajectory> mix(const DatasetSpec& spec)
{
    double proportion_sum = 0.0;
    for (const MixShare& share : spec.mix)
        proportion_sum += share.proportion;
    if (std::abs(proportion_sum - 1.0) > 1e-9)
        throw std::invalid_argument("mix: proportions sum to " + std::to_string(proportion_sum)
                                    + ", expected 1");
    std::unordered_map<std::string, const DatasetSource*> by_label;
    for (const DatasetSource& source : spec.sources)
        if (!by_label.emplace(source.label, &source).second)
            throw std::invalid_argument("mix: duplicate source label '" + source.label + "'");

    // floor(p * target) per share; remainder goes to the largest share
    // (ties broken by label for determinism).
    std::vector<std::pair<std::string, std::size_t>> takes;
    std::size_t assigned = 0;
    const MixShare* largest = nullptr;
    std::unordered_map<std::string, bool> share_labels;
    for (const MixShare& share : spec.mix) {
        if (!share_labels.emplace(share.label, true).second)
            throw std::invalid_argument("mix: duplicate share label '" + share.label + "'");
        if (share.proportion < 0.0 || share.proportion > 1.0)
            throw std::invalid_argument("mix: proportion out of [0,1] for '" + share.label + "'");
        if (!by_label.count(share.label))
            throw std::invalid_argument("mix: unknown source label '" + share.label + "'");
        auto take = static_cast<std::size_t>(
            std::floor(share.proportion * static_cast<double>(spec.target_size) + 1e-12));
        takes.push_back({share.label, take});
        assigned += take;
        if (largest == nullptr || share.proportion > largest->proportion
            || (share.proportion == largest->proportion && share.label < largest->label))
            largest = &share;
    }
    if (assigned < spec.target_size && largest != nullptr) {
        for (auto& [label, take] : takes)
            if (label == largest->label)
                take += spec.target_size - assigned;
    }

    std::vector<Trajectory> out;
    out.reserve(spec.target_size);
    for (const auto& [label, take] : takes) {
        const DatasetSource& source = *by_label.at(label);
        if (source.records.size() < take)
            throw InsufficientSourceError(label, take, source.records.size());
        std::mt19937_64 rng(detrand::fnv1a64(label, spec.seed ^ detrand::kFnvOffset));
        auto sampled = detrand::sample_without_replacement(source.records, take, rng);
        out.insert(out.end(), sampled.begin(), sampled.end());
    }
    std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
    detrand::shuffle(out, rng);
    return out;
}

std::vector<Trajectory> dedup_by_patch(const std::vector<Trajectory>& records)
{
    // patches_identical is an equivalence over normalized structure, so a
    // canonical serialization works as the dedup key.
    auto canonical_key = [](const Trajectory& record) {
        if (!record.patch)
            throw std::invalid_argument("dedup_by_patch: record '" + record.id
                                        + "' carries no patch");
        auto patch = patchdiff::parse_unified_diff(*record.patch);
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
    };

    std::vector<Trajectory> out;
    std::unordered_map<std::string, bool> seen;
    for (const Trajectory& record : records)
        if (seen.emplace(canonical_key(record), true).second)
            out.push_back(record);
    return out;
}

} // namespace trajkit::curation
