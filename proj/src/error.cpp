#include "sepsis/error.hpp"

namespace sepsis {

namespace {
std::string locate(const std::string& source, std::size_t row, std::size_t column, const std::string& message) {
    std::string out = source;
    if (row) out += ":" + std::to_string(row);
    if (column) out += ":" + std::to_string(column);
    if (!out.empty()) out += ": ";
    return out + message;
}
} // namespace

SchemaError::SchemaError(const std::string& source, std::size_t row, std::size_t column, const std::string& message)
    : Error(locate(source, row, column, message)), source_(source), row_(row), column_(column) {}

} // namespace sepsis
