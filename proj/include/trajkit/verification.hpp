// Copyright 2026 the trajkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "trajkit/patchdiff.hpp"
#include "trajkit/trajectory.hpp"

namespace trajkit::verification {

enum class Bucket { Unverified, Soft, Hard };

std::string_view bucket_name(Bucket bucket);
Bucket bucket_from_name(std::string_view name);

/// hard iff r == 1, unverified iff r == 0, soft otherwise.
Bucket bucket_of(double r);

struct VerificationRecord {
    std::string trajectory_id;
    double r = 0.0;
    Bucket bucket = Bucket::Unverified;

    friend bool operator==(const VerificationRecord&, const VerificationRecord&) = default;
};

class UnpatchedTrajectoryError : public std::runtime_error {
public:
    explicit UnpatchedTrajectoryError(const std::string& id)
        : std::runtime_error("unpatched trajectory: " + id)
    {
    }
};

/// Recall of the second rollout's patch against the first rollout's patch.
VerificationRecord verify_pair(const trajectory::Trajectory& first,
                               const trajectory::Trajectory& second,
                               patchdiff::IdentityMode mode = patchdiff::IdentityMode::WithPath);

struct ThresholdGroup {
    double lo = 0.0;      // inclusive
    double hi = 1.0;      // exclusive, except the final group which is closed
    bool closed = false;  // final group includes hi
    std::vector<VerificationRecord> records;
};

/// Partitions records into [t0,t1), [t1,t2), ..., [t_last, 1]. Thresholds
/// must be strictly increasing, start at 0, and stay within [0,1].
std::vector<ThresholdGroup> bucket_by_thresholds(const std::vector<VerificationRecord>& records,
                                                 const std::vector<double>& thresholds);

/// Order-preserving subset with r >= threshold.
std::vector<VerificationRecord> filter_at_least(const std::vector<VerificationRecord>& records,
                                                double threshold);

nlohmann::json to_json(const VerificationRecord& record);
VerificationRecord verification_from_json(const nlohmann::json& j);
std::vector<VerificationRecord> read_verification_jsonl(const std::string& path);
void write_verification_jsonl(const std::string& path, const std::vector<VerificationRecord>& records);

} // namespace trajkit::verification
