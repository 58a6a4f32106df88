// Copyright 2026 the trajkit authors
// SPDX-License-Identifier: Apache-2.0

#include "trajkit/patchdiff.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace trajkit::patchdiff {

namespace {

struct RawLine {
    std::string_view text; // without trailing newline
    std::size_t byte_offset = 0;
    std::size_t number = 1; // 1-based
};

std::vector<RawLine> split_lines(std::string_view text)
{
    std::vector<RawLine> lines;
    std::size_t pos = 0;
    std::size_t number = 1;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::size_t end = nl == std::string_view::npos ? text.size() : nl;
        lines.push_back({text.substr(pos, end - pos), pos, number});
        pos = end + 1;
        ++number;
    }
    return lines;
}

// Strips the conventional a/ b/ prefix and any tab-separated timestamp
// suffix from a ---/+++ header path.
std::string parse_header_path(std::string_view raw)
{
    std::size_t tab = raw.find('\t');
    if (tab != std::string_view::npos)
        raw = raw.substr(0, tab);
    while (!raw.empty() && raw.back() == ' ')
        raw.remove_suffix(1);
    if (raw == "/dev/null")
        return std::string(raw);
    if (raw.size() >= 2 && (raw[0] == 'a' || raw[0] == 'b') && raw[1] == '/')
        raw.remove_prefix(2);
    return std::string(raw);
}

bool parse_number(std::string_view& s, std::size_t& out)
{
    if (s.empty() || !std::isdigit(static_cast<unsigned char>(s[0])))
        return false;
    std::size_t value = 0;
    while (!s.empty() && std::isdigit(static_cast<unsigned char>(s[0]))) {
        value = value * 10 + static_cast<std::size_t>(s[0] - '0');
        s.remove_prefix(1);
    }
    out = value;
    return true;
}

bool consume(std::string_view& s, std::string_view prefix)
{
    if (s.substr(0, prefix.size()) != prefix)
        return false;
    s.remove_prefix(prefix.size());
    return true;
}

// "@@ -l[,n] +l[,m] @@[ section]"
bool parse_hunk_header(std::string_view line, Hunk& hunk)
{
    std::string_view s = line;
    if (!consume(s, "@@ -"))
        return false;
    if (!parse_number(s, hunk.old_start))
        return false;
    hunk.old_count = 1;
    if (consume(s, ",") && !parse_number(s, hunk.old_count))
        return false;
    if (!consume(s, " +"))
        return false;
    if (!parse_number(s, hunk.new_start))
        return false;
    hunk.new_count = 1;
    if (consume(s, ",") && !parse_number(s, hunk.new_count))
        return false;
    if (!consume(s, " @@"))
        return false;
    if (consume(s, " "))
        hunk.section = std::string(s);
    else if (!s.empty())
        return false;
    return true;
}

bool hunk_has_changes(const Hunk& hunk)
{
    return std::any_of(hunk.lines.begin(), hunk.lines.end(),
                       [](const PatchLine& l) { return l.kind != LineKind::Context; });
}

} // namespace

ParseError::ParseError(const std::string& what, std::size_t byte_offset, std::size_t line_number)
    : std::runtime_error(what + " (line " + std::to_string(line_number) + ", byte offset "
                         + std::to_string(byte_offset) + ")"),
      byte_offset_(byte_offset),
      line_number_(line_number)
{
}

Patch parse_unified_diff(std::string_view text)
{
    Patch patch;
    const std::vector<RawLine> lines = split_lines(text);

    FilePatch* current = nullptr;
    bool have_old_path = false;
    std::string pending_old_path;

    Hunk hunk;
    bool in_hunk = false;
    std::size_t old_remaining = 0;
    std::size_t new_remaining = 0;

    auto finish_hunk = [&](const RawLine& at) {
        if (!hunk_has_changes(hunk))
            throw ParseError("hunk contains no added or removed lines", at.byte_offset, at.number);
        if (hunk.old_start == 0 && hunk.old_count != 0)
            throw ParseError("hunk start line must be >= 1", at.byte_offset, at.number);
        if (hunk.new_start == 0 && hunk.new_count != 0)
            throw ParseError("hunk start line must be >= 1", at.byte_offset, at.number);
        current->hunks.push_back(std::move(hunk));
        hunk = Hunk{};
        in_hunk = false;
    };

    for (const RawLine& line : lines) {
        std::string_view s = line.text;
        if (!s.empty() && s[0] == '\\' && current != nullptr) {
            // "\ No newline at end of file" annotates the previous diff line.
            if (in_hunk && !hunk.lines.empty())
                hunk.lines.back().no_newline = true;
            else if (!in_hunk && !current->hunks.empty() && !current->hunks.back().lines.empty())
                current->hunks.back().lines.back().no_newline = true;
            continue;
        }
        if (in_hunk) {
            char marker = s.empty() ? ' ' : s[0];
            std::string_view body = s.empty() ? s : s.substr(1);
            switch (marker) {
            case ' ':
                if (old_remaining == 0 || new_remaining == 0)
                    throw ParseError("hunk body longer than header counts", line.byte_offset, line.number);
                hunk.lines.push_back({LineKind::Context, std::string(body), false});
                --old_remaining;
                --new_remaining;
                break;
            case '-':
                if (old_remaining == 0)
                    throw ParseError("hunk body longer than header counts", line.byte_offset, line.number);
                hunk.lines.push_back({LineKind::Removed, std::string(body), false});
                --old_remaining;
                break;
            case '+':
                if (new_remaining == 0)
                    throw ParseError("hunk body longer than header counts", line.byte_offset, line.number);
                hunk.lines.push_back({LineKind::Added, std::string(body), false});
                --new_remaining;
                break;
            default:
                throw ParseError("unexpected line inside hunk body", line.byte_offset, line.number);
            }
            if (old_remaining == 0 && new_remaining == 0)
                finish_hunk(line);
            continue;
        }

        if (s.rfind("--- ", 0) == 0) {
            pending_old_path = parse_header_path(s.substr(4));
            have_old_path = true;
            current = nullptr;
            continue;
        }
        if (s.rfind("+++ ", 0) == 0) {
            if (!have_old_path)
                throw ParseError("+++ header without preceding --- header", line.byte_offset, line.number);
            patch.files.push_back(FilePatch{pending_old_path, parse_header_path(s.substr(4)), {}});
            current = &patch.files.back();
            have_old_path = false;
            continue;
        }
        if (s.rfind("@@", 0) == 0) {
            if (current == nullptr)
                throw ParseError("hunk header before any file header", line.byte_offset, line.number);
            if (!parse_hunk_header(s, hunk))
                throw ParseError("malformed hunk header", line.byte_offset, line.number);
            old_remaining = hunk.old_count;
            new_remaining = hunk.new_count;
            if (old_remaining == 0 && new_remaining == 0)
                throw ParseError("hunk contains no added or removed lines", line.byte_offset, line.number);
            in_hunk = true;
            continue;
        }
        // diff --git framing, index/mode/rename metadata, and any preamble
        // text between file entries are skipped; rename entries without
        // hunks still surface as (old, new) path pairs.
        if (s.rfind("rename from ", 0) == 0) {
            pending_old_path = std::string(s.substr(12));
            have_old_path = true;
            continue;
        }
        if (s.rfind("rename to ", 0) == 0 && have_old_path) {
            patch.files.push_back(FilePatch{pending_old_path, std::string(s.substr(10)), {}});
            current = &patch.files.back();
            have_old_path = false;
            continue;
        }
    }

    if (in_hunk)
        throw ParseError("truncated hunk body", text.size(),
                         lines.empty() ? 1 : lines.back().number + 1);
    return patch;
}

std::string to_unified_diff(const Patch& patch)
{
    std::ostringstream out;
    for (const FilePatch& file : patch.files) {
        if (file.hunks.empty()) {
            out << "rename from " << file.old_path << "\n";
            out << "rename to " << file.new_path << "\n";
            continue;
        }
        out << "--- " << (file.old_path == "/dev/null" ? file.old_path : "a/" + file.old_path) << "\n";
        out << "+++ " << (file.new_path == "/dev/null" ? file.new_path : "b/" + file.new_path) << "\n";
        for (const Hunk& hunk : file.hunks) {
            out << "@@ -" << hunk.old_start << "," << hunk.old_count << " +" << hunk.new_start << ","
                << hunk.new_count << " @@";
            if (!hunk.section.empty())
                out << " " << hunk.section;
            out << "\n";
            for (const PatchLine& line : hunk.lines) {
                char marker = line.kind == LineKind::Added ? '+' : line.kind == LineKind::Removed ? '-' : ' ';
                out << marker << line.text << "\n";
                if (line.no_newline)
                    out << "\\ No newline at end of file\n";
            }
        }
    }
    return out.str();
}

void ChangeSet::insert(ChangeKey key, std::size_t multiplicity)
{
    if (multiplicity == 0)
        return;
    entries_[std::move(key)] += multiplicity;
    cardinality_ += multiplicity;
}

std::size_t ChangeSet::multiplicity(const ChangeKey& key) const
{
    auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second;
}

std::string trim_trailing_whitespace(std::string_view s)
{
    std::size_t end = s.size();
    while (end > 0 && (s[end - 1] == ' ' || s[end - 1] == '\t' || s[end - 1] == '\r'))
        --end;
    return std::string(s.substr(0, end));
}

ChangeSet change_set(const Patch& patch, IdentityMode mode)
{
    ChangeSet set;
    for (const FilePatch& file : patch.files) {
        std::string path = mode == IdentityMode::WithPath ? file.path() : std::string(kWildcardPath);
        for (const Hunk& hunk : file.hunks) {
            for (const PatchLine& line : hunk.lines) {
                if (line.kind == LineKind::Context)
                    continue;
                set.insert(ChangeKey{path, line.kind, trim_trailing_whitespace(line.text)});
            }
        }
    }
    return set;
}

double recall(const ChangeSet& candidate, const ChangeSet& reference)
{
    if (reference.empty())
        throw EmptyReferenceError();
    std::size_t hits = 0;
    for (const auto& [key, count] : reference.entries())
        hits += std::min(count, candidate.multiplicity(key));
    return static_cast<double>(hits) / static_cast<double>(reference.cardinality());
}

std::size_t patch_total_lines(const Patch& patch)
{
    std::size_t total = 0;
    for (const FilePatch& file : patch.files)
        for (const Hunk& hunk : file.hunks)
            for (const PatchLine& line : hunk.lines)
                if (line.kind != LineKind::Context)
                    ++total;
    return total;
}

namespace {

struct NormalizedFile {
    std::string old_path;
    std::string new_path;
    std::vector<Hunk> hunks; // line text trimmed
};

std::vector<NormalizedFile> normalize(const Patch& patch)
{
    std::vector<NormalizedFile> files;
    files.reserve(patch.files.size());
    for (const FilePatch& file : patch.files) {
        NormalizedFile norm{file.old_path, file.new_path, file.hunks};
        for (Hunk& hunk : norm.hunks) {
            hunk.section.clear();
            for (PatchLine& line : hunk.lines)
                line.text = trim_trailing_whitespace(line.text);
        }
        files.push_back(std::move(norm));
    }
    std::sort(files.begin(), files.end(),
              [](const NormalizedFile& a, const NormalizedFile& b) {
                  return std::tie(a.old_path, a.new_path) < std::tie(b.old_path, b.new_path);
              });
    return files;
}

} // namespace

bool patches_identical(const Patch& a, const Patch& b)
{
    auto na = normalize(a);
    auto nb = normalize(b);
    if (na.size() != nb.size())
        return false;
    for (std::size_t i = 0; i < na.size(); ++i) {
        if (na[i].old_path != nb[i].old_path || na[i].new_path != nb[i].new_path
            || na[i].hunks != nb[i].hunks)
            return false;
    }
    return true;
}

namespace {

struct SplitText {
    std::vector<std::string_view> lines;
    bool trailing_newline = true;
};

SplitText split_body(std::string_view text)
{
    SplitText out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            out.lines.push_back(text.substr(pos));
            out.trailing_newline = false;
            break;
        }
        out.lines.push_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return out;
}

enum class EditOp { Keep, Delete, Insert };

// Myers O(ND) greedy diff over lines.
std::vector<std::pair<EditOp, std::size_t>> myers_edit_script(const std::vector<std::string_view>& a,
                                                              const std::vector<std::string_view>& b)
{
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(a.size());
    const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(b.size());
    const std::ptrdiff_t max = n + m;
    std::vector<std::vector<std::ptrdiff_t>> trace;
    std::vector<std::ptrdiff_t> v(static_cast<std::size_t>(2 * max + 1), 0);
    auto at = [&](std::vector<std::ptrdiff_t>& vec, std::ptrdiff_t k) -> std::ptrdiff_t& {
        return vec[static_cast<std::size_t>(k + max)];
    };

    std::ptrdiff_t found_d = -1;
    for (std::ptrdiff_t d = 0; d <= max; ++d) {
        trace.push_back(v);
        for (std::ptrdiff_t k = -d; k <= d; k += 2) {
            std::ptrdiff_t x;
            if (k == -d || (k != d && at(v, k - 1) < at(v, k + 1)))
                x = at(v, k + 1);
            else
                x = at(v, k - 1) + 1;
            std::ptrdiff_t y = x - k;
            while (x < n && y < m && a[static_cast<std::size_t>(x)] == b[static_cast<std::size_t>(y)]) {
                ++x;
                ++y;
            }
            at(v, k) = x;
            if (x >= n && y >= m) {
                found_d = d;
                break;
            }
        }
        if (found_d >= 0)
            break;
    }

    // Backtrack.
    std::vector<std::pair<EditOp, std::size_t>> script;
    std::ptrdiff_t x = n;
    std::ptrdiff_t y = m;
    for (std::ptrdiff_t d = found_d; d > 0; --d) {
        auto& prev = trace[static_cast<std::size_t>(d)];
        std::ptrdiff_t k = x - y;
        std::ptrdiff_t prev_k;
        if (k == -d || (k != d && at(prev, k - 1) < at(prev, k + 1)))
            prev_k = k + 1;
        else
            prev_k = k - 1;
        std::ptrdiff_t prev_x = at(prev, prev_k);
        std::ptrdiff_t prev_y = prev_x - prev_k;
        while (x > prev_x && y > prev_y) {
            script.push_back({EditOp::Keep, static_cast<std::size_t>(x - 1)});
            --x;
            --y;
        }
        if (x == prev_x) {
            script.push_back({EditOp::Insert, static_cast<std::size_t>(y - 1)});
            --y;
        } else {
            script.push_back({EditOp::Delete, static_cast<std::size_t>(x - 1)});
            --x;
        }
    }
    while (x > 0 && y > 0) {
        script.push_back({EditOp::Keep, static_cast<std::size_t>(x - 1)});
        --x;
        --y;
    }
    while (x > 0) {
        script.push_back({EditOp::Delete, static_cast<std::size_t>(--x)});
    }
    while (y > 0) {
        script.push_back({EditOp::Insert, static_cast<std::size_t>(--y)});
    }
    std::reverse(script.begin(), script.end());
    return script;
}

} // namespace

std::string make_unified_diff(std::string_view old_text, std::string_view new_text,
                              std::string_view path, std::size_t context)
{
    if (old_text == new_text)
        return "";
    SplitText oldf = split_body(old_text);
    SplitText newf = split_body(new_text);
    auto script = myers_edit_script(oldf.lines, newf.lines);

    struct Row {
        LineKind kind;
        std::size_t old_index; // valid unless Added
        std::size_t new_index; // valid unless Removed
    };
    std::vector<Row> rows;
    {
        std::size_t oi = 0;
        std::size_t ni = 0;
        for (auto [op, idx] : script) {
            (void)idx;
            switch (op) {
            case EditOp::Keep:
                rows.push_back({LineKind::Context, oi++, ni++});
                break;
            case EditOp::Delete:
                rows.push_back({LineKind::Removed, oi++, ni});
                break;
            case EditOp::Insert:
                rows.push_back({LineKind::Added, oi, ni++});
                break;
            }
        }
    }

    Patch patch;
    FilePatch file{std::string(path), std::string(path), {}};

    std::size_t i = 0;
    while (i < rows.size()) {
        if (rows[i].kind == LineKind::Context) {
            ++i;
            continue;
        }
        // Expand a change run into a hunk with surrounding context.
        std::size_t start = i;
        std::size_t end = i;
        while (true) {
            // Absorb further change runs separated by <= 2*context keeps.
            std::size_t j = end + 1;
            std::size_t gap = 0;
            while (j < rows.size() && rows[j].kind == LineKind::Context && gap <= 2 * context) {
                ++gap;
                ++j;
            }
            if (j < rows.size() && rows[j].kind != LineKind::Context && gap <= 2 * context)
                end = j;
            else
                break;
        }
        std::size_t lead = std::min(context, start);
        std::size_t from = start - lead;
        std::size_t tail = 0;
        std::size_t to = end;
        while (tail < context && to + 1 < rows.size() && rows[to + 1].kind == LineKind::Context) {
            ++to;
            ++tail;
        }

        Hunk hunk;
        bool first_row = true;
        for (std::size_t r = from; r <= to; ++r) {
            const Row& row = rows[r];
            std::string_view text = row.kind == LineKind::Added
                ? newf.lines[row.new_index]
                : oldf.lines[row.old_index];
            bool no_newline = false;
            if (row.kind != LineKind::Removed && !newf.trailing_newline
                && row.new_index + 1 == newf.lines.size())
                no_newline = true;
            if (row.kind == LineKind::Removed && !oldf.trailing_newline
                && row.old_index + 1 == oldf.lines.size())
                no_newline = true;
            if (row.kind == LineKind::Context && !oldf.trailing_newline
                && row.old_index + 1 == oldf.lines.size())
                no_newline = true;
            if (first_row) {
                hunk.old_start = row.old_index + 1;
                hunk.new_start = row.new_index + 1;
                first_row = false;
            }
            if (row.kind != LineKind::Added)
                ++hunk.old_count;
            if (row.kind != LineKind::Removed)
                ++hunk.new_count;
            hunk.lines.push_back({row.kind, std::string(text), no_newline});
        }
        // Empty sides use the "insert after line N" convention (0 at top).
        if (hunk.old_count == 0)
            hunk.old_start = rows[from].old_index;
        if (hunk.new_count == 0)
            hunk.new_start = rows[from].new_index;
        file.hunks.push_back(std::move(hunk));
        i = to + 1;
    }

    patch.files.push_back(std::move(file));
    return to_unified_diff(patch);
}

} // namespace trajkit::patchdiff
