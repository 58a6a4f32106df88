// Copyright 2026 the trajkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace trajkit::patchdiff {

enum class LineKind { Added, Removed, Context };

struct PatchLine {
    LineKind kind = LineKind::Context;
    std::string text;        // without the leading marker or trailing newline
    bool no_newline = false; // followed by "\ No newline at end of file"

    friend bool operator==(const PatchLine&, const PatchLine&) = default;
};

/// One @@ block. Start positions are 1-based; a start of 0 is only legal for
/// an empty side (file creation/deletion hunks).
struct Hunk {
    std::size_t old_start = 1;
    std::size_t old_count = 0;
    std::size_t new_start = 1;
    std::size_t new_count = 0;
    std::string section; // trailing text after the closing @@, if any
    std::vector<PatchLine> lines;

    friend bool operator==(const Hunk&, const Hunk&) = default;
};

struct FilePatch {
    std::string old_path; // "a/" prefix stripped; "/dev/null" for created files
    std::string new_path; // "b/" prefix stripped; "/dev/null" for deleted files
    std::vector<Hunk> hunks;

    /// Repository-relative path of the file this patch applies to.
    const std::string& path() const { return new_path == "/dev/null" ? old_path : new_path; }

    friend bool operator==(const FilePatch&, const FilePatch&) = default;
};

struct Patch {
    std::vector<FilePatch> files;

    friend bool operator==(const Patch&, const Patch&) = default;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t byte_offset, std::size_t line_number);

    std::size_t byte_offset() const { return byte_offset_; }
    std::size_t line_number() const { return line_number_; }

private:
    std::size_t byte_offset_;
    std::size_t line_number_;
};

/// Parses standard unified-diff text (the ---/+++/@@ format, including the
/// "diff --git" framing emitted by git). Empty input yields an empty patch.
/// Rename and mode-change entries are kept but carry no hunks.
Patch parse_unified_diff(std::string_view text);

/// Inverse of parse_unified_diff: parse(to_unified_diff(p)) == p.
std::string to_unified_diff(const Patch& patch);

enum class IdentityMode { WithPath, PathAgnostic };

inline constexpr std::string_view kWildcardPath = "*";

/// Identity of one changed line: (path, added/removed, text with trailing
/// whitespace trimmed). Context lines never become keys.
struct ChangeKey {
    std::string path; // kWildcardPath in path-agnostic mode
    LineKind kind = LineKind::Added;
    std::string text;

    friend auto operator<=>(const ChangeKey&, const ChangeKey&) = default;
};

/// Multiset of changed lines; repeated identical edits count once each.
class ChangeSet {
public:
    void insert(ChangeKey key, std::size_t multiplicity = 1);

    std::size_t cardinality() const { return cardinality_; }
    bool empty() const { return cardinality_ == 0; }
    std::size_t multiplicity(const ChangeKey& key) const;
    const std::map<ChangeKey, std::size_t>& entries() const { return entries_; }

    friend bool operator==(const ChangeSet&, const ChangeSet&) = default;

private:
    std::map<ChangeKey, std::size_t> entries_;
    std::size_t cardinality_ = 0;
};

ChangeSet change_set(const Patch& patch, IdentityMode mode = IdentityMode::WithPath);

class EmptyReferenceError : public std::runtime_error {
public:
    EmptyReferenceError() : std::runtime_error("empty reference patch") {}
};

/// Line-level recall |candidate ∩ reference| / |reference| under multiset
/// intersection (per-key minimum multiplicity). Throws EmptyReferenceError
/// when the reference has cardinality 0.
double recall(const ChangeSet& candidate, const ChangeSet& reference);

/// Number of added + removed lines across all files.
std::size_t patch_total_lines(const Patch& patch);

/// True iff the two patches touch the same files with the same hunk
/// sequences after trimming trailing whitespace from every line.
bool patches_identical(const Patch& a, const Patch& b);

std::string trim_trailing_whitespace(std::string_view s);

/// Line-based Myers diff of two file bodies, rendered as one unified-diff
/// file entry. Returns an empty string when the texts are identical.
std::string make_unified_diff(std::string_view old_text, std::string_view new_text,
                              std::string_view path, std::size_t context = 3);

} // namespace trajkit::patchdiff
