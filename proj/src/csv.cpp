#include "sepsis/csv.hpp"

#include <cmath>
#include <system_error>

#include "sepsis/error.hpp"

namespace sepsis::csv {

namespace {
std::vector<std::string> split_owned(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.emplace_back(line.substr(start, comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

void strip_cr(std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
}
} // namespace

Reader::Reader(const std::filesystem::path& path) : source_(path.string()), in_(path) {
    if (!in_) throw SchemaError(source_, 0, 0, "cannot open file");
    std::string first;
    if (!std::getline(in_, first)) throw SchemaError(source_, 1, 0, "missing header");
    strip_cr(first);
    line_ = 1;
    header_ = split_owned(first);
}

Reader::Reader(const std::filesystem::path& path, std::vector<std::string> expected_header) : Reader(path) {
    if (header_ != expected_header) {
        std::string want;
        for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
        throw SchemaError(source_, 1, 0, "unexpected header; expected '" + want + "'");
    }
}

bool Reader::next() {
    while (std::getline(in_, buffer_)) {
        ++line_;
        strip_cr(buffer_);
        if (buffer_.empty()) continue;
        split(buffer_);
        if (fields_.size() != header_.size())
            throw SchemaError(source_, line_, 0,
                              "expected " + std::to_string(header_.size()) + " fields, got " +
                                  std::to_string(fields_.size()));
        return true;
    }
    return false;
}

void Reader::split(const std::string& line) {
    fields_.clear();
    std::string_view sv(line);
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = sv.find(',', start);
        fields_.push_back(sv.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
}

std::string_view Reader::text(std::size_t column) const { return fields_.at(column); }

std::optional<double> Reader::optional_number(std::size_t column) const {
    std::string_view f = text(column);
    if (f.empty()) return std::nullopt;
    double x = 0.0;
    auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), x);
    if (ec != std::errc() || ptr != f.data() + f.size()) fail(column, "not a number: '" + std::string(f) + "'");
    return x;
}

double Reader::number(std::size_t column) const {
    auto x = optional_number(column);
    if (!x) fail(column, "empty numeric field");
    return *x;
}

long Reader::integer(std::size_t column) const {
    std::string_view f = text(column);
    long x = 0;
    auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), x);
    if (f.empty() || ec != std::errc() || ptr != f.data() + f.size())
        fail(column, "not an integer: '" + std::string(f) + "'");
    return x;
}

void Reader::fail(std::size_t column, const std::string& message) const {
    std::string name = column < header_.size() ? header_[column] : std::string();
    throw SchemaError(source_, line_, column + 1, (name.empty() ? "" : name + ": ") + message);
}

std::string format_number(double x) {
    if (std::isnan(x)) return {};
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

AtomicFile::AtomicFile(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    tmp_ = path_;
    tmp_ += ".tmp";
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!out_) throw Error("cannot write " + tmp_.string());
}

AtomicFile::~AtomicFile() {
    if (!committed_) {
        out_.close();
        std::error_code ec;
        std::filesystem::remove(tmp_, ec);
    }
}

void AtomicFile::commit() {
    out_.flush();
    if (!out_) throw Error("write failed for " + tmp_.string());
    out_.close();
    std::filesystem::rename(tmp_, path_);
    committed_ = true;
}

void write_header(std::ostream& out, std::initializer_list<std::string_view> columns) {
    bool first = true;
    for (auto c : columns) {
        if (!first) out << ',';
        out << c;
        first = false;
    }
    out << '\n';
}

} // namespace sepsis::csv
