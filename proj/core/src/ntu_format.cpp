#include "asma/ntu_format.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>

#include "asma/error.hpp"

ASMA_NAMESPACE_BEGIN

namespace {

constexpr std::size_t kNtuJoints = 25;

class LineReader {
   public:
    explicit LineReader(std::istream& in) : in_(in) {}

    // Next non-blank line split on whitespace; throws on end of input.
    std::vector<std::string_view> fields(const char* expecting) {
        while (std::getline(in_, line_)) {
            ++line_no_;
            if (!line_.empty() && line_.back() == '\r') line_.pop_back();
            split();
            if (!fields_.empty()) return fields_;
        }
        throw ParseError(ErrorCode::MalformedRecord, line_no_ + 1,
                         std::string("unexpected end of input, expecting ") + expecting);
    }

    bool at_end() {
        while (in_.peek() != std::char_traits<char>::eof()) {
            const int c = in_.peek();
            if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                if (c == '\n') ++line_no_;
                in_.get();
                continue;
            }
            return false;
        }
        return true;
    }

    std::size_t line() const { return line_no_; }

   private:
    void split() {
        fields_.clear();
        std::string_view s(line_);
        std::size_t i = 0;
        while (i < s.size()) {
            while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
            std::size_t j = i;
            while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
            if (j > i) fields_.push_back(s.substr(i, j - i));
            i = j;
        }
    }

    std::istream& in_;
    std::string line_;
    std::vector<std::string_view> fields_;
    std::size_t line_no_ = 0;
};

double to_double(std::string_view f, std::size_t line) {
    double value = 0.0;
    const char* first = f.data();
    if (!f.empty() && f.front() == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, f.data() + f.size(), value);
    if (ec != std::errc() || ptr != f.data() + f.size())
        throw ParseError(ErrorCode::NonNumericField, line, "non-numeric field '" + std::string(f) + "'");
    return value;
}

std::size_t to_count(const std::vector<std::string_view>& fields, std::size_t line, const char* what) {
    if (fields.size() != 1)
        throw ParseError(ErrorCode::MalformedRecord, line,
                         std::string("expected a single ") + what + " field, got " +
                             std::to_string(fields.size()));
    std::size_t value = 0;
    const auto f = fields[0];
    const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), value);
    if (ec != std::errc() || ptr != f.data() + f.size())
        throw ParseError(ErrorCode::NonNumericField, line,
                         std::string("non-numeric ") + what + " '" + std::string(f) + "'");
    return value;
}

}  // namespace

std::vector<SkeletonSequence> parse_ntu_skeleton(std::istream& in, const GraphPtr& graph) {
    if (graph->num_joints() != kNtuJoints)
        throw Error(ErrorCode::InvalidArgument, "NTU parsing needs the 25-joint graph");
    LineReader reader(in);
    if (reader.at_end()) throw ParseError(ErrorCode::EmptyFile, 1, "empty skeleton file");

    const std::size_t frames = to_count(reader.fields("frame count"), reader.line(), "frame count");
    if (frames == 0) throw ParseError(ErrorCode::MalformedRecord, reader.line(), "frame count is zero");

    // body id -> frames x (25 x 3) coordinates, frame-major while reading
    std::map<std::string, std::size_t> index_of;
    std::vector<std::vector<double>> coords;

    for (std::size_t t = 0; t < frames; ++t) {
        const std::size_t bodies = to_count(reader.fields("body count"), reader.line(), "body count");
        for (std::size_t b = 0; b < bodies; ++b) {
            const auto header = reader.fields("body header");
            const std::string id(header[0]);
            const std::size_t joints = to_count(reader.fields("joint count"), reader.line(), "joint count");
            if (joints != kNtuJoints)
                throw ParseError(ErrorCode::MalformedRecord, reader.line(),
                                 "joint count " + std::to_string(joints) + " != 25");
            auto [it, inserted] = index_of.emplace(id, coords.size());
            if (inserted) coords.emplace_back(frames * kNtuJoints * 3, 0.0);
            auto& body = coords[it->second];
            for (std::size_t v = 0; v < joints; ++v) {
                const auto f = reader.fields("joint record");
                if (f.size() < 3)
                    throw ParseError(ErrorCode::MalformedRecord, reader.line(),
                                     "joint record has " + std::to_string(f.size()) + " fields, need >= 3");
                for (std::size_t c = 0; c < 3; ++c) {
                    const double value = to_double(f[c], reader.line());
                    if (!std::isfinite(value))
                        throw ParseError(ErrorCode::NonNumericField, reader.line(), "non-finite coordinate");
                    body[(t * kNtuJoints + v) * 3 + c] = value;
                }
            }
        }
    }
    if (!reader.at_end())
        throw ParseError(ErrorCode::MalformedRecord, reader.line() + 1, "trailing data after last frame");
    if (coords.empty()) throw ParseError(ErrorCode::MalformedRecord, reader.line(), "no bodies in file");

    std::vector<SkeletonSequence> out;
    out.reserve(coords.size());
    for (const auto& body : coords) {
        SkeletonSequence seq(3, frames, graph);
        for (std::size_t t = 0; t < frames; ++t)
            for (std::size_t v = 0; v < kNtuJoints; ++v)
                for (std::size_t c = 0; c < 3; ++c)
                    seq.at(c, t, v) = static_cast<real>(body[(t * kNtuJoints + v) * 3 + c]);
        out.push_back(std::move(seq));
    }
    return out;
}

std::vector<SkeletonSequence> parse_ntu_skeleton(std::string_view text, const GraphPtr& graph) {
    std::istringstream in{std::string(text)};
    return parse_ntu_skeleton(in, graph);
}

void write_ntu_skeleton(std::ostream& out, const std::vector<SkeletonSequence>& bodies) {
    if (bodies.empty()) throw Error(ErrorCode::InvalidArgument, "nothing to write");
    const std::size_t frames = bodies.front().frames();
    for (const auto& b : bodies)
        if (b.frames() != frames || b.channels() != 3 || b.joints() != kNtuJoints)
            throw Error(ErrorCode::ShapeMismatch, "bodies must share a 3 x T x 25 shape");
    char buf[64];
    out << frames << '\n';
    for (std::size_t t = 0; t < frames; ++t) {
        out << bodies.size() << '\n';
        for (std::size_t b = 0; b < bodies.size(); ++b) {
            out << (72057594037900000ULL + b) << " 0 1 1 1 1 0 0 0 2\n" << kNtuJoints << '\n';
            for (std::size_t v = 0; v < kNtuJoints; ++v) {
                for (std::size_t c = 0; c < 3; ++c) {
                    std::snprintf(buf, sizeof buf, "%.17g", static_cast<double>(bodies[b].at(c, t, v)));
                    out << (c ? " " : "") << buf;
                }
                out << '\n';
            }
        }
    }
}

std::optional<int> ntu_label_from_filename(std::string_view name) {
    const auto slash = name.find_last_of("/\\");
    if (slash != std::string_view::npos) name = name.substr(slash + 1);
    for (std::size_t i = 0; i + 3 < name.size(); ++i) {
        if (name[i] != 'A') continue;
        int value = 0;
        const auto [ptr, ec] = std::from_chars(name.data() + i + 1, name.data() + i + 4, value);
        if (ec == std::errc() && ptr == name.data() + i + 4 && value > 0) return value - 1;
    }
    return std::nullopt;
}

ASMA_NAMESPACE_END
