#include "sgdclt/io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>

#include <openssl/evp.h>

#include "sgdclt/errors.hpp"

namespace sgdclt {

namespace {

void dump_value(const Json& j, int indent, int depth, std::string& out) {
  const std::string pad = indent > 0 ? std::string(static_cast<std::size_t>(indent * (depth + 1)), ' ') : "";
  const std::string close_pad = indent > 0 ? std::string(static_cast<std::size_t>(indent * depth), ' ') : "";
  const char* nl = indent > 0 ? "\n" : "";
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{";
      out += nl;
      bool first = true;
      for (const auto& [key, value] : j.items()) {
        if (!first) {
          out += ",";
          out += nl;
        }
        first = false;
        out += pad;
        out += Json(key).dump();
        out += indent > 0 ? ": " : ":";
        dump_value(value, indent, depth + 1, out);
      }
      out += nl;
      out += close_pad;
      out += "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      // Arrays of scalars stay on one line so matrices read row by row.
      const bool flat = std::none_of(j.begin(), j.end(), [](const Json& e) { return e.is_structured(); });
      out += "[";
      if (!flat) out += nl;
      bool first = true;
      for (const auto& e : j) {
        if (!first) {
          out += ",";
          out += flat ? (indent > 0 ? " " : "") : nl;
        }
        first = false;
        if (!flat) out += pad;
        dump_value(e, indent, depth + 1, out);
      }
      if (!flat) {
        out += nl;
        out += close_pad;
      }
      out += "]";
      return;
    }
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      out += std::isfinite(v) ? format_double(v) : "null";
      return;
    }
    default:
      out += j.dump();
      return;
  }
}

}  // namespace

std::string format_double(double v) {
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", v);
  return buf.data();
}

std::string dump_json(const Json& j, int indent) {
  std::string out;
  dump_value(j, indent, 0, out);
  out += "\n";
  return out;
}

Json to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Matrix matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw Error(ErrorCode::Config, "matrix must be a non-empty array of rows");
  const auto n = static_cast<Eigen::Index>(j.size());
  // A flat array is read as a diagonal.
  if (!j.front().is_array()) {
    Matrix m = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!j[static_cast<std::size_t>(i)].is_number()) throw Error(ErrorCode::Config, "matrix entries must be numbers");
      m(i, i) = j[static_cast<std::size_t>(i)].get<double>();
    }
    return m;
  }
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Matrix m(n, cols);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw Error(ErrorCode::Config, "matrix rows must have equal length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!row[static_cast<std::size_t>(c)].is_number()) throw Error(ErrorCode::Config, "matrix entries must be numbers");
      m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\r\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_double(row[i]);
    out << "\r\n";
  }
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << content;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string sha256_string(const std::string& data) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1) {
    throw Error(ErrorCode::Io, "SHA-256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::string sha256_file(const std::string& path) { return sha256_string(read_text(path)); }

}  // namespace sgdclt
