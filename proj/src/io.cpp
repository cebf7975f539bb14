#include "cherrynet/io.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unistd.h>

namespace cherrynet {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto end = s.find(sep, start);
    parts.push_back(trim(s.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start)));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return parts;
}

bool parse_integer(std::string_view tok, long long& out) {
  const auto* end = tok.data() + tok.size();
  auto [p, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && p == end;
}

bool parse_double(const std::string& tok, double& out) {
  if (tok.empty()) return false;
  errno = 0;
  char* end = nullptr;
  out = std::strtod(tok.c_str(), &end);
  return end == tok.c_str() + tok.size() && errno != ERANGE;
}

std::string where(std::string_view source, std::size_t line) {
  return std::string(source) + ":" + std::to_string(line) + ": ";
}

}  // namespace

DenseTensor parse_tensor(std::istream& in, std::string_view source) {
  std::string line;
  std::size_t line_no = 0;
  // Next non-comment, non-blank line.
  auto next_content = [&](std::string& out) {
    while (std::getline(in, out)) {
      ++line_no;
      const std::string t = trim(out);
      if (t.empty() || t.front() == '#') continue;
      out = t;
      return true;
    }
    return false;
  };

  if (!next_content(line)) throw FormatError(where(source, line_no) + "missing order line");
  long long order = 0;
  if (!parse_integer(line, order) || order < 1)
    throw FormatError(where(source, line_no) + "expected a positive tensor order, got '" + line + "'");

  if (!next_content(line)) throw FormatError(where(source, line_no) + "missing dimension line");
  Shape shape;
  {
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) {
      long long d = 0;
      if (!parse_integer(tok, d) || d < 1)
        throw FormatError(where(source, line_no) + "dimension '" + tok + "' is not a positive integer");
      shape.push_back(static_cast<std::size_t>(d));
    }
  }
  if (shape.size() != static_cast<std::size_t>(order))
    throw FormatError(where(source, line_no) + "header declares order " + std::to_string(order) + " but lists " +
                      std::to_string(shape.size()) + " dimensions");

  const std::size_t expected = num_elements(shape);
  std::vector<double> values;
  values.reserve(expected);
  while (next_content(line)) {
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) {
      double v = 0.0;
      if (!parse_double(tok, v))
        throw FormatError(where(source, line_no) + "non-numeric token '" + tok + "'");
      values.push_back(v);
    }
  }
  if (values.size() != expected)
    throw FormatError(where(source, line_no) + "value count mismatch: expected " + std::to_string(expected) +
                      ", got " + std::to_string(values.size()));
  return DenseTensor(std::move(shape), std::move(values));
}

void format_tensor(std::ostream& out, const DenseTensor& t) {
  out << t.order() << '\n';
  for (std::size_t n = 0; n < t.order(); ++n) out << (n ? " " : "") << t.dim(n);
  out << '\n';
  const std::size_t row = t.order() ? t.dim(0) : 1;
  char buf[32];
  for (std::size_t e = 0; e < t.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%.17g", t[e]);
    out << buf << ((e + 1) % row == 0 ? '\n' : ' ');
  }
}

DenseTensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return parse_tensor(in, path.string());
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp." + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("failed writing '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into '" + path.string() + "'");
  }
}

void write_tensor(const std::filesystem::path& path, const DenseTensor& t) {
  std::ostringstream ss;
  format_tensor(ss, t);
  write_file_atomic(path, ss.str());
}

void write_factors(const std::filesystem::path& path, const CherryFactors& g) {
  std::ostringstream ss;
  ss << "# iFCTN cherry factors\n" << g.order() << '\n';
  for (std::size_t n = 0; n < g.order(); ++n) ss << (n ? " " : "") << g.shape()[n];
  ss << '\n';
  const auto upper = g.ranks().upper();
  for (std::size_t s = 0; s < upper.size(); ++s) ss << (s ? " " : "") << upper[s];
  ss << '\n';
  char buf[32];
  for (std::size_t k = 0; k < g.order(); ++k)
    for (std::size_t i = 0; i < g.order(); ++i) {
      if (i == k) continue;
      const auto v = g.factor(k, i).values();
      for (std::size_t e = 0; e < v.size(); ++e) {
        std::snprintf(buf, sizeof buf, "%.17g", v[e]);
        ss << (e ? " " : "") << buf;
      }
      ss << '\n';
    }
  write_file_atomic(path, ss.str());
}

CherryFactors read_factors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  const std::string source = path.string();
  std::vector<std::pair<std::size_t, std::string>> tokens;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::istringstream ss(t);
    std::string tok;
    while (ss >> tok) tokens.emplace_back(line_no, tok);
  }
  std::size_t cursor = 0;
  auto next_int = [&](const char* what) {
    if (cursor >= tokens.size()) throw FormatError(where(source, line_no) + "missing " + what);
    long long v = 0;
    if (!parse_integer(tokens[cursor].second, v) || v < 1)
      throw FormatError(where(source, tokens[cursor].first) + what + " must be a positive integer");
    ++cursor;
    return v;
  };
  const auto order = static_cast<std::size_t>(next_int("order"));
  Shape shape(order);
  for (auto& d : shape) d = static_cast<std::size_t>(next_int("dimension"));
  std::vector<long long> upper(order * (order - 1) / 2);
  for (auto& r : upper) r = next_int("rank");
  CherryFactors g(shape, RankMatrix::from_upper(order, upper));
  for (std::size_t k = 0; k < order; ++k)
    for (std::size_t i = 0; i < order; ++i) {
      if (i == k) continue;
      for (double& v : g.factor(k, i).values()) {
        if (cursor >= tokens.size()) throw FormatError(where(source, line_no) + "too few factor values");
        if (!parse_double(tokens[cursor].second, v))
          throw FormatError(where(source, tokens[cursor].first) + "non-numeric token '" + tokens[cursor].second + "'");
        ++cursor;
      }
    }
  if (cursor != tokens.size()) throw FormatError(where(source, tokens[cursor].first) + "trailing values after factors");
  return g;
}

std::vector<std::size_t> parse_size_list(std::string_view s) {
  std::vector<std::size_t> out;
  for (const auto& tok : split(s, ',')) {
    long long v = 0;
    if (!parse_integer(tok, v) || v < 0) throw FormatError("'" + tok + "' is not a non-negative integer in '" + std::string(s) + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

Shape parse_shape(std::string_view s) {
  Shape shape = parse_size_list(s);
  for (std::size_t d : shape)
    if (d == 0) throw FormatError("shape '" + std::string(s) + "' has a zero dimension");
  return shape;
}

RankMatrix parse_ranks(std::string_view s, std::size_t order) {
  auto to_ints = [&](const std::string& row) {
    std::vector<long long> v;
    for (const auto& tok : split(row, ',')) {
      long long x = 0;
      if (!parse_integer(tok, x)) throw FormatError("rank entry '" + tok + "' is not an integer");
      v.push_back(x);
    }
    return v;
  };
  try {
    if (s.find(';') != std::string_view::npos) {
      std::vector<std::vector<long long>> rows;
      for (const auto& row : split(s, ';')) rows.push_back(to_ints(row));
      if (rows.size() != order)
        throw FormatError("rank matrix has wrong count of rows: expected " + std::to_string(order) + ", got " +
                          std::to_string(rows.size()));
      return RankMatrix::from_full(rows);
    }
    const auto upper = to_ints(std::string(s));
    return RankMatrix::from_upper(order, upper);
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
}

}  // namespace cherrynet
