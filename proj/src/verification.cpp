// Copyright 2026 the trajkit authors
// SPDX-License-Identifier: Apache-2.0

#include "trajkit/verification.hpp"

#include <fstream>

namespace trajkit::verification {

std::string_view bucket_name(Bucket bucket)
{
    switch (bucket) {
    case Bucket::Unverified: return "unverified";
    case Bucket::Soft: return "soft";
    case Bucket::Hard: return "hard";
    }
    return "unverified";
}

Bucket bucket_from_name(std::string_view name)
{
    if (name == "unverified") return Bucket::Unverified;
    if (name == "soft") return Bucket::Soft;
    if (name == "hard") return Bucket::Hard;
    throw std::invalid_argument("unknown verification bucket: " + std::string(name));
}

Bucket bucket_of(double r)
{
    if (r < 0.0 || r > 1.0)
        throw std::invalid_argument("recall out of [0,1]: " + std::to_string(r));
    if (r == 1.0)
        return Bucket::Hard;
    if (r == 0.0)
        return Bucket::Unverified;
    return Bucket::Soft;
}

VerificationRecord verify_pair(const trajectory::Trajectory& first,
                               const trajectory::Trajectory& second,
                               patchdiff::IdentityMode mode)
{
    if (!first.patch)
        throw UnpatchedTrajectoryError(first.id);
    if (!second.patch)
        throw UnpatchedTrajectoryError(second.id);
    auto reference = patchdiff::change_set(patchdiff::parse_unified_diff(*first.patch), mode);
    auto candidate = patchdiff::change_set(patchdiff::parse_unified_diff(*second.patch), mode);
    double r = patchdiff::recall(candidate, reference);
    return VerificationRecord{second.id, r, bucket_of(r)};
}

std::vector<ThresholdGroup> bucket_by_thresholds(const std::vector<VerificationRecord>& records,
                                                 const std::vector<double>& thresholds)
{
    if (thresholds.empty())
        throw std::invalid_argument("thresholds must be non-empty");
    if (thresholds.front() != 0.0)
        throw std::invalid_argument("thresholds must start at 0");
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        if (thresholds[i] < 0.0 || thresholds[i] > 1.0)
            throw std::invalid_argument("thresholds must lie within [0,1]");
        if (i > 0 && thresholds[i] <= thresholds[i - 1])
            throw std::invalid_argument("thresholds must be strictly increasing");
    }

    std::vector<ThresholdGroup> groups;
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        bool last = i + 1 == thresholds.size();
        groups.push_back({thresholds[i], last ? 1.0 : thresholds[i + 1], last, {}});
    }
    for (const VerificationRecord& record : records) {
        for (ThresholdGroup& group : groups) {
            bool in = group.closed ? record.r >= group.lo && record.r <= group.hi
                                   : record.r >= group.lo && record.r < group.hi;
            if (in) {
                group.records.push_back(record);
                break;
            }
        }
    }
    return groups;
}

std::vector<VerificationRecord> filter_at_least(const std::vector<VerificationRecord>& records,
                                                double threshold)
{
    if (threshold < 0.0 || threshold > 1.0)
        throw std::invalid_argument("threshold must lie within [0,1]");
    std::vector<VerificationRecord> out;
    for (const VerificationRecord& record : records)
        if (record.r >= threshold)
            out.push_back(record);
    return out;
}

nlohmann::json to_json(const VerificationRecord& record)
{
    return {{"schema_version", trajectory::kSchemaVersion},
            {"trajectory_id", record.trajectory_id},
            {"r", record.r},
            {"bucket", bucket_name(record.bucket)}};
}

VerificationRecord verification_from_json(const nlohmann::json& j)
{
    int version = j.value("schema_version", -1);
    if (version != trajectory::kSchemaVersion)
        throw trajectory::SchemaVersionError(version);
    return {j.at("trajectory_id").get<std::string>(), j.at("r").get<double>(),
            bucket_from_name(j.at("bucket").get<std::string>())};
}

std::vector<VerificationRecord> read_verification_jsonl(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open verification shard: " + path);
    std::vector<VerificationRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        records.push_back(verification_from_json(nlohmann::json::parse(line)));
    }
    return records;
}

void write_verification_jsonl(const std::string& path, const std::vector<VerificationRecord>& records)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write verification shard: " + path);
    for (const VerificationRecord& record : records)
        out << to_json(record).dump() << "\n";
}

} // namespace trajkit::verification
