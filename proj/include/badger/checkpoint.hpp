#pragma once

// Checkpoint text format (one item per line, '\n' endings):
//
//   badger-checkpoint
//   format_version 1
//   created 2026-01-01T00:00:00Z
//   hidden_size 32
//   message_size 8
//   key_size 8
//   input_size 1
//   id_embedding 0
//   id_slots 8
//   task_kind guessing_game
//   es_seed 1
//   generations_completed 250
//   schedule_stage 0
//   params 5216
//   3fb999999999999a          <- one IEEE-754 binary64 bit pattern per line, 16 hex digits
//   ...
//   end
//
// The `created` line is the only field that is not a function of the
// checkpoint's content.

#include <bit>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "checkpoint_types.hpp"

namespace badger {

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string hex_bits(double v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(std::bit_cast<std::uint64_t>(v)));
    return buf;
}

inline std::string serialize_checkpoint(const Checkpoint& ck) {
    std::ostringstream os;
    const ShapeSpec& s = ck.params.shape;
    os << "badger-checkpoint\n"
       << "format_version " << ck.format_version << '\n'
       << "created " << (ck.created.empty() ? "unknown" : ck.created) << '\n'
       << "hidden_size " << s.hidden_size << '\n'
       << "message_size " << s.message_size << '\n'
       << "key_size " << s.key_size << '\n'
       << "input_size " << s.input_size << '\n'
       << "id_embedding " << (s.id_embedding ? 1 : 0) << '\n'
       << "id_slots " << s.id_slots << '\n'
       << "task_kind " << to_string(ck.task_kind) << '\n'
       << "es_seed " << ck.es_seed << '\n'
       << "generations_completed " << ck.generations_completed << '\n'
       << "schedule_stage " << ck.schedule_stage << '\n'
       << "params " << ck.params.size() << '\n';
    for (double v : ck.params.values) os << hex_bits(v) << '\n';
    os << "end\n";
    return os.str();
}

namespace detail {

class LineReader {
public:
    explicit LineReader(std::string_view text) : text_(text) {}

    std::size_t offset() const { return pos_; }

    std::string_view next_line() {
        if (pos_ >= text_.size()) throw ParseError("checkpoint: unexpected end of file", pos_);
        const std::size_t nl = text_.find('\n', pos_);
        if (nl == std::string_view::npos) throw ParseError("checkpoint: unterminated last line", pos_);
        line_start_ = pos_;
        auto line = text_.substr(pos_, nl - pos_);
        pos_ = nl + 1;
        return line;
    }

    // Reads "<key> <value>" and returns the value text.
    std::string_view field(std::string_view key) {
        const auto line = next_line();
        if (line.size() <= key.size() || line.substr(0, key.size()) != key || line[key.size()] != ' ')
            throw ParseError("checkpoint: expected field '" + std::string(key) + "'", line_start_);
        value_start_ = line_start_ + key.size() + 1;
        return line.substr(key.size() + 1);
    }

    template <typename Int>
    Int integer(std::string_view key) {
        const auto v = field(key);
        Int out{};
        const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc{} || p != v.data() + v.size())
            throw ParseError("checkpoint: bad integer for '" + std::string(key) + "'", value_start_);
        return out;
    }

    std::size_t line_start() const { return line_start_; }
    bool at_end() const { return pos_ >= text_.size(); }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_start_ = 0;
    std::size_t value_start_ = 0;
};

}  // namespace detail

inline Checkpoint parse_checkpoint(std::string_view text) {
    detail::LineReader in(text);
    if (in.next_line() != "badger-checkpoint") throw ParseError("checkpoint: missing header", 0);
    Checkpoint ck;
    ck.format_version = in.integer<long long>("format_version");
    if (ck.format_version != kCheckpointFormatVersion)
        throw VersionError("checkpoint: unsupported format_version " + std::to_string(ck.format_version) +
                               " (this build reads version " + std::to_string(kCheckpointFormatVersion) + ")",
                           ck.format_version);
    ck.created = std::string(in.field("created"));
    ShapeSpec s;
    s.hidden_size = in.integer<std::size_t>("hidden_size");
    s.message_size = in.integer<std::size_t>("message_size");
    s.key_size = in.integer<std::size_t>("key_size");
    s.input_size = in.integer<std::size_t>("input_size");
    const int id = in.integer<int>("id_embedding");
    if (id != 0 && id != 1) throw ParseError("checkpoint: id_embedding must be 0 or 1", in.line_start());
    s.id_embedding = id == 1;
    s.id_slots = in.integer<std::size_t>("id_slots");
    try {
        s.validate();
    } catch (const ArgumentError& e) {
        throw ParseError(std::string("checkpoint: invalid shape: ") + e.what(), in.line_start());
    }
    const auto kind = in.field("task_kind");
    try {
        ck.task_kind = task_kind_from_string(std::string(kind));
    } catch (const ArgumentError&) {
        throw ParseError("checkpoint: unknown task_kind", in.line_start());
    }
    ck.es_seed = in.integer<std::uint64_t>("es_seed");
    ck.generations_completed = in.integer<std::uint64_t>("generations_completed");
    ck.schedule_stage = in.integer<std::size_t>("schedule_stage");
    const auto count = in.integer<std::size_t>("params");
    if (count != parameter_count(s))
        throw ParseError("checkpoint: params count " + std::to_string(count) + " does not match shape (" +
                             std::to_string(parameter_count(s)) + ")",
                         in.line_start());
    ck.params.shape = s;
    ck.params.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const auto line = in.next_line();
        std::uint64_t bits = 0;
        const auto [p, ec] = std::from_chars(line.data(), line.data() + line.size(), bits, 16);
        if (line.size() != 16 || ec != std::errc{} || p != line.data() + line.size())
            throw ParseError("checkpoint: corrupt hex for parameter " + std::to_string(i), in.line_start());
        ck.params.values[i] = std::bit_cast<double>(bits);
    }
    if (in.next_line() != "end") throw ParseError("checkpoint: missing end marker", in.line_start());
    if (!in.at_end()) throw ParseError("checkpoint: trailing data after end marker", in.offset());
    return ck;
}

// Writes via a temporary file and rename, so readers never see a partial file.
inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    Checkpoint out = ck;
    if (out.created.empty()) out.created = utc_timestamp();
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot write checkpoint " + tmp.string());
        f << serialize_checkpoint(out);
        if (!f.flush()) throw IoError("failed writing checkpoint " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read " + path.string());
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(read_file(path)); }

}  // namespace badger
