#pragma once

// Command implementations behind the `cherrynet` executable.  Each returns a
// process exit code and never leaves partial output files behind.

#include "cherrynet/eval.hpp"
#include "cherrynet/solver.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace cherrynet::cli {

enum ExitCode : int {
  kSuccess = 0,
  kMaxIterReached = 2,
  kInvariantViolation = 3,
  kInputError = 4,
};

struct SynthOptions {
  Shape shape;
  std::string ranks;
  std::uint64_t seed = 0;
  double init_scale = 1.0;
  std::filesystem::path out;
  std::optional<std::filesystem::path> factors_out;
};

struct MaskOptions {
  std::optional<Shape> shape;
  std::optional<std::filesystem::path> input;  // shape taken from this tensor file
  MaskKind kind = MaskKind::random;
  double rate = 0.0;
  std::size_t fiber_mode = 0;  // 1-based, fiber kind only
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

struct CompleteOptions {
  std::filesystem::path input;
  std::filesystem::path mask;
  std::string ranks;
  SolverConfig solver;
  std::filesystem::path out;
  std::optional<std::filesystem::path> trace;
  /// Writes 0 in the trace's seconds column so repeated runs are byte-identical.
  bool no_timing = false;
};

struct EvalOptions {
  std::filesystem::path truth;
  std::filesystem::path recovered;
  std::optional<std::filesystem::path> mask;
  std::vector<std::string> metrics{"psnr", "ssim", "rse", "rmse"};
  bool key_value = false;
};

struct ParamsOptions {
  Shape shape;
  std::optional<std::string> ranks;   // shared by iFCTN and FCTN
  std::optional<std::string> ifctn;
  std::optional<std::string> fctn;
  std::optional<std::vector<std::size_t>> tucker;
  std::optional<std::vector<std::size_t>> tt;
};

int cmd_synth(const SynthOptions& opt, std::ostream& out, std::ostream& err);
int cmd_mask(const MaskOptions& opt, std::ostream& out, std::ostream& err);
int cmd_complete(const CompleteOptions& opt, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream& err);
int cmd_params(const ParamsOptions& opt, std::ostream& out, std::ostream& err);

inline constexpr const char* kTraceHeader = "iter,objective,step_norm,rel_change,seconds";

std::string format_trace_csv(const SolveReport& report, bool with_timing);

/// key=value lines; '#' comments and blank lines ignored.
std::map<std::string, std::string> read_config(const std::filesystem::path& path);

/// Appends "--key value" for every config key whose flag is absent from
/// `args`, so explicit flags win over the file.  Keys listed in
/// `switches` are boolean and only appended when their value is true.
std::vector<std::string> merge_config(std::vector<std::string> args, const std::map<std::string, std::string>& config,
                                      const std::vector<std::string>& switches);

/// Full command-line entry point; args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cherrynet::cli
