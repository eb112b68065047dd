#pragma once

#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace sepsis::csv {

/// Line-oriented reader for the pipeline's flat CSV files (no quoting).
/// The first line must match the expected header exactly.
class Reader {
public:
    Reader(const std::filesystem::path& path, std::vector<std::string> expected_header);
    /// Accepts any header; use `header()` to inspect it.
    explicit Reader(const std::filesystem::path& path);

    /// Advances to the next non-empty data row; false at end of file.
    bool next();

    const std::vector<std::string>& header() const { return header_; }
    std::size_t line() const { return line_; }
    std::size_t size() const { return fields_.size(); }

    std::string_view text(std::size_t column) const;
    double number(std::size_t column) const;
    /// Empty field -> nullopt.
    std::optional<double> optional_number(std::size_t column) const;
    long integer(std::size_t column) const;

    [[noreturn]] void fail(std::size_t column, const std::string& message) const;

private:
    void split(const std::string& line);

    std::string source_;
    std::ifstream in_;
    std::vector<std::string> header_;
    std::vector<std::string_view> fields_;
    std::string buffer_;
    std::size_t line_ = 0;
};

/// Shortest round-trip representation; NaN is written as an empty field.
std::string format_number(double x);

/// Writes to `<path>.tmp` and renames over `path` on commit(); the
/// temporary is removed if the object is destroyed uncommitted.
class AtomicFile {
public:
    explicit AtomicFile(std::filesystem::path path);
    ~AtomicFile();
    AtomicFile(const AtomicFile&) = delete;
    AtomicFile& operator=(const AtomicFile&) = delete;

    std::ostream& stream() { return out_; }
    void commit();

private:
    std::filesystem::path path_;
    std::filesystem::path tmp_;
    std::ofstream out_;
    bool committed_ = false;
};

/// Convenience for writing one row of mixed fields.
class RowWriter {
public:
    explicit RowWriter(std::ostream& out) : out_(out) {}
    RowWriter& operator<<(std::string_view s) { sep(); out_ << s; return *this; }
    RowWriter& operator<<(const std::string& s) { return *this << std::string_view(s); }
    RowWriter& operator<<(const char* s) { return *this << std::string_view(s); }
    RowWriter& operator<<(double x) { sep(); out_ << format_number(x); return *this; }
    RowWriter& operator<<(long x) { sep(); out_ << x; return *this; }
    RowWriter& operator<<(int x) { sep(); out_ << x; return *this; }
    RowWriter& operator<<(std::size_t x) { sep(); out_ << x; return *this; }
    void end() { out_ << '\n'; first_ = true; }

private:
    void sep() { if (!first_) out_ << ','; first_ = false; }
    std::ostream& out_;
    bool first_ = true;
};

void write_header(std::ostream& out, std::initializer_list<std::string_view> columns);

} // namespace sepsis::csv
