#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sgdclt/linalg.hpp"

namespace sgdclt {

using Json = nlohmann::ordered_json;

/// %.17g, so doubles round-trip exactly.
std::string format_double(double v);

/// Serializes with every float at 17 significant digits; non-finite floats
/// become null.
std::string dump_json(const Json& j, int indent = 2);

Json to_json(const Matrix& m);  // row-major array of rows
Json to_json(const Vector& v);
Matrix matrix_from_json(const Json& j);

/// RFC-4180 CSV with numeric cells only.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

void write_text(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

/// Lowercase hex SHA-256 of a file's bytes or of a string.
std::string sha256_file(const std::string& path);
std::string sha256_string(const std::string& data);

}  // namespace sgdclt
