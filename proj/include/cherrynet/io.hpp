#pragma once

// Text tensor files and small string parsers for the command line.
//
// Tensor file layout:
//   line 1   order N
//   line 2   N dimensions
//   rest     prod(dims) whitespace-separated values, first mode fastest
// Lines whose first non-blank character is '#' are ignored.  Masks use the
// same layout with 0/1 values.

#include "cherrynet/cherry.hpp"
#include "cherrynet/tensor.hpp"

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cherrynet {

/// Malformed input; the message carries the source name and line number.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

DenseTensor parse_tensor(std::istream& in, std::string_view source = "<input>");
void format_tensor(std::ostream& out, const DenseTensor& t);

DenseTensor read_tensor(const std::filesystem::path& path);
/// Writes through a temporary sibling file and renames it into place.
void write_tensor(const std::filesystem::path& path, const DenseTensor& t);

/// Atomic whole-file write used by every command output.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Factor dump: order, dimensions, upper-triangle ranks, then every G(k,i)
/// (k ascending, then i ascending) in column-major order, one factor per line.
void write_factors(const std::filesystem::path& path, const CherryFactors& g);
CherryFactors read_factors(const std::filesystem::path& path);

/// "256,256,31" -> {256, 256, 31}; every entry must be a positive integer.
Shape parse_shape(std::string_view s);

/// Comma-separated non-negative integers.
std::vector<std::size_t> parse_size_list(std::string_view s);

/// Either the full matrix "0,4,4;4,0,4;4,4,0" or the strict upper triangle
/// "4,4,4" (row-major R(1,2), R(1,3), ..., R(N-1,N)).
RankMatrix parse_ranks(std::string_view s, std::size_t order);

}  // namespace cherrynet
