#include "cherrynet/commands.hpp"

#include "cherrynet/io.hpp"
#include "cherrynet/simd/kernels.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cherrynet::cli {

namespace {

std::string fixed(double v, int digits) {
  if (std::isinf(v)) return v > 0 ? "INF" : "-INF";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Shortest text that round-trips.
std::string shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// Maps library exceptions onto exit codes.
template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const InvariantViolation& e) {
    err << "error: invariant violation: " << e.what() << '\n';
    return kInvariantViolation;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
}

}  // namespace

int cmd_synth(const SynthOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RankMatrix ranks = parse_ranks(opt.ranks, opt.shape.size());
    const CherryFactors g = init_factors(opt.shape, ranks, opt.seed, opt.init_scale);
    const DenseTensor truth = ifctn_reconstruct(g, simd::scalar_kernels());
    write_tensor(opt.out, truth);
    if (opt.factors_out) write_factors(*opt.factors_out, g);
    out << "wrote " << opt.out.string() << " (" << truth.size() << " entries, " << g.parameter_count()
        << " factor parameters)\n";
    return kSuccess;
  });
}

int cmd_mask(const MaskOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    Shape shape;
    if (opt.input) {
      shape = read_tensor(*opt.input).shape();
    } else if (opt.shape) {
      shape = *opt.shape;
    } else {
      throw std::invalid_argument("mask needs --shape or --input");
    }
    MaskSpec spec{opt.kind, opt.rate, 0, opt.seed};
    if (opt.kind == MaskKind::fiber) {
      if (opt.fiber_mode < 1 || opt.fiber_mode > shape.size())
        throw std::invalid_argument("--fiber-mode must lie in 1.." + std::to_string(shape.size()));
      spec.fiber_mode = opt.fiber_mode - 1;
    }
    const DenseTensor mask = gen_mask(shape, spec);
    write_tensor(opt.out, mask);
    const auto missing = static_cast<std::size_t>(std::count(mask.values().begin(), mask.values().end(), 0.0));
    out << "wrote " << opt.out.string() << " (" << missing << " of " << mask.size() << " entries missing)\n";
    return kSuccess;
  });
}

std::string format_trace_csv(const SolveReport& report, bool with_timing) {
  std::ostringstream ss;
  ss << kTraceHeader << '\n';
  for (std::size_t s = 0; s < report.iterations; ++s) {
    const IterationRecord r = report.record(s);
    ss << r.iter << ',' << shortest(r.objective) << ',' << shortest(r.step_norm) << ',' << shortest(r.rel_change) << ','
       << (with_timing ? shortest(r.seconds) : std::string("0")) << '\n';
  }
  return ss.str();
}

int cmd_complete(const CompleteOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    CompletionProblem problem{read_tensor(opt.input), read_tensor(opt.mask), {}};
    if (problem.mask.shape() != problem.observed.shape())
      throw ShapeError("mask shape does not match the input tensor");
    problem.ranks = parse_ranks(opt.ranks, problem.observed.order());
    problem.validate();
    opt.solver.validate();

    SolverConfig cfg = opt.solver;
    if (!cfg.init_scale) cfg.init_scale = default_init_scale(problem);
    out << "rho=" << shortest(cfg.rho) << " max_iter=" << cfg.max_iter << " eps=" << shortest(cfg.eps)
        << " seed=" << cfg.seed << " init_scale=" << shortest(*cfg.init_scale) << " threads=" << cfg.threads
        << " simd=" << simd::active().name << '\n';

    const SolveReport report = pam_solve(problem, cfg);

    std::string trace_csv;
    if (opt.trace) trace_csv = format_trace_csv(report, !opt.no_timing);
    write_tensor(opt.out, report.x);
    if (opt.trace) write_file_atomic(*opt.trace, trace_csv);

    const double final_obj = report.objective_trace.empty() ? report.initial_objective : report.objective_trace.back();
    out << "status=" << (report.converged ? "converged" : "max-iter") << " iterations=" << report.iterations
        << " objective=" << shortest(final_obj) << '\n';
    return report.converged ? kSuccess : kMaxIterReached;
  });
}

int cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    for (const auto& m : opt.metrics)
      if (m != "psnr" && m != "ssim" && m != "rse" && m != "rmse")
        throw std::invalid_argument("unknown metric '" + m + "' (expected psnr, ssim, rse, rmse)");
    const bool want_rmse = std::find(opt.metrics.begin(), opt.metrics.end(), "rmse") != opt.metrics.end();
    if (want_rmse && !opt.mask)
      throw std::invalid_argument("rmse needs --mask: the number of missing entries is undefined without it");

    const DenseTensor truth = read_tensor(opt.truth);
    const DenseTensor recovered = read_tensor(opt.recovered);
    if (truth.shape() != recovered.shape()) throw ShapeError("truth and recovered tensors differ in shape");
    std::optional<DenseTensor> mask;
    if (opt.mask) {
      mask = read_tensor(*opt.mask);
      if (mask->shape() != truth.shape()) throw ShapeError("mask shape does not match the tensors");
    }

    std::ostringstream lines;
    const char sep = opt.key_value ? '=' : ' ';
    for (const auto& m : opt.metrics) {
      std::string value;
      if (m == "psnr") value = fixed(psnr(truth, recovered), 4);
      if (m == "ssim") value = truth.order() == 2 || truth.order() == 3 ? fixed(ssim(truth, recovered), 4) : "n/a";
      if (m == "rse") value = fixed(rse(truth, recovered), 4);
      if (m == "rmse") value = fixed(rmse(truth, recovered, *mask), 4);
      lines << m << sep << value << '\n';
    }
    out << lines.str();
    return kSuccess;
  });
}

int cmd_params(const ParamsOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (opt.shape.empty()) throw std::invalid_argument("params needs --shape");
    const double total = static_cast<double>(num_elements(opt.shape));
    std::ostringstream lines;
    auto report = [&](Model m, std::uint64_t count) {
      lines << to_string(m) << ' ' << count << " (" << fixed(100.0 * static_cast<double>(count) / total, 2) << "%)\n";
    };
    bool any = false;
    if (const auto& s = opt.ifctn ? opt.ifctn : opt.ranks) {
      report(Model::ifctn, param_count_ifctn(opt.shape, parse_ranks(*s, opt.shape.size())));
      any = true;
    }
    if (const auto& s = opt.fctn ? opt.fctn : opt.ranks) {
      report(Model::fctn, param_count_fctn(opt.shape, parse_ranks(*s, opt.shape.size())));
      any = true;
    }
    if (opt.tucker) {
      report(Model::tucker, param_count_tucker(opt.shape, *opt.tucker));
      any = true;
    }
    if (opt.tt) {
      report(Model::tt, param_count_tt(opt.shape, *opt.tt));
      any = true;
    }
    if (!any) throw std::invalid_argument("params needs at least one of --ranks, --ifctn, --fctn, --tucker, --tt");
    out << lines.str();
    return kSuccess;
  });
}

// ---- config handling ------------------------------------------------------

std::map<std::string, std::string> read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::map<std::string, std::string> cfg;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    cfg[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return cfg;
}

std::vector<std::string> merge_config(std::vector<std::string> args, const std::map<std::string, std::string>& config,
                                      const std::vector<std::string>& switches) {
  auto present = [&](const std::string& flag) {
    return std::any_of(args.begin(), args.end(),
                       [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
  };
  for (const auto& [key, value] : config) {
    const std::string flag = "--" + key;
    if (present(flag)) continue;
    if (std::find(switches.begin(), switches.end(), key) != switches.end()) {
      if (value == "true" || value == "1" || value == "yes" || value == "on") args.push_back(flag);
    } else {
      args.push_back(flag);
      args.push_back(value);
    }
  }
  return args;
}

// ---- CLI11 front end ------------------------------------------------------

namespace {

struct Raw {
  std::string shape, ranks, ifctn, fctn, tucker, tt, kind = "random", metrics = "psnr,ssim,rse,rmse";
  std::string simd = "auto";
  std::string config;
  double init_scale = 0.0;
  bool init_scale_set = false;
};

}  // namespace

int run(const std::vector<std::string>& args_in, std::ostream& out, std::ostream& err) {
  CLI::App app{"iFCTN tensor completion toolkit"};
  app.require_subcommand(1);
  Raw raw;
  app.add_option("--config", raw.config, "key=value file supplying defaults for flags");
  app.add_option("--simd", raw.simd, "kernel set: auto, scalar, avx2")->check(CLI::IsMember({"auto", "scalar", "avx2"}));

  SynthOptions synth;
  std::string synth_out, synth_factors;
  auto* s_cmd = app.add_subcommand("synth", "generate an exactly iFCTN-representable tensor");
  s_cmd->add_option("--shape", raw.shape, "dimensions, e.g. 12,12,12")->required();
  s_cmd->add_option("--ranks", raw.ranks, "upper-triangle or full rank matrix")->required();
  s_cmd->add_option("--seed", synth.seed);
  s_cmd->add_option("--init-scale", synth.init_scale, "factor entries uniform on [0, scale)");
  s_cmd->add_option("--out", synth_out)->required();
  s_cmd->add_option("--factors-out", synth_factors, "also dump the generating factors");

  MaskOptions mask;
  std::string mask_input, mask_out;
  auto* m_cmd = app.add_subcommand("mask", "generate a random or fiber missing pattern");
  m_cmd->add_option("--shape", raw.shape);
  m_cmd->add_option("--input", mask_input, "take the shape from this tensor file");
  m_cmd->add_option("--kind", raw.kind)->check(CLI::IsMember({"random", "fiber"}));
  m_cmd->add_option("--rate", mask.rate, "missing ratio in [0, 1)")->required();
  m_cmd->add_option("--fiber-mode", mask.fiber_mode, "1-based mode of the removed fibers");
  m_cmd->add_option("--seed", mask.seed);
  m_cmd->add_option("--out", mask_out)->required();

  CompleteOptions complete;
  std::string c_input, c_mask, c_out, c_trace;
  auto* c_cmd = app.add_subcommand("complete", "recover missing entries with the PAM solver");
  c_cmd->add_option("--input", c_input)->required();
  c_cmd->add_option("--mask", c_mask)->required();
  c_cmd->add_option("--ranks", raw.ranks)->required();
  c_cmd->add_option("--rho", complete.solver.rho, "proximal weight")->capture_default_str();
  c_cmd->add_option("--max-iter", complete.solver.max_iter)->capture_default_str();
  c_cmd->add_option("--eps", complete.solver.eps, "relative-change stopping threshold")->capture_default_str();
  c_cmd->add_option("--seed", complete.solver.seed)->capture_default_str();
  auto* c_scale = c_cmd->add_option("--init-scale", raw.init_scale, "default: (mean |observed|)^(1/N) in [0.1, 1]");
  c_cmd->add_option("--threads", complete.solver.threads)->envname("CHERRYNET_THREADS")->capture_default_str();
  c_cmd->add_flag("--assert-decrease", complete.solver.assert_decrease, "check sufficient decrease every iteration");
  c_cmd->add_option("--out", c_out)->required();
  c_cmd->add_option("--trace", c_trace, "per-iteration CSV");
  c_cmd->add_flag("--no-timing", complete.no_timing, "write 0 in the trace seconds column");

  EvalOptions eval;
  std::string e_truth, e_rec, e_mask;
  auto* e_cmd = app.add_subcommand("eval", "recovery metrics");
  e_cmd->add_option("--truth", e_truth)->required();
  e_cmd->add_option("--recovered", e_rec)->required();
  e_cmd->add_option("--mask", e_mask, "observation mask; needed for rmse");
  e_cmd->add_option("--metrics", raw.metrics, "comma-separated subset of psnr,ssim,rse,rmse");
  e_cmd->add_flag("--kv", eval.key_value, "key=value output");

  ParamsOptions params;
  auto* p_cmd = app.add_subcommand("params", "parameter counts of iFCTN, FCTN, Tucker and TT");
  p_cmd->add_option("--shape", raw.shape)->required();
  p_cmd->add_option("--ranks", raw.ranks, "iFCTN and FCTN rank matrix");
  p_cmd->add_option("--ifctn", raw.ifctn);
  p_cmd->add_option("--fctn", raw.fctn);
  p_cmd->add_option("--tucker", raw.tucker, "one rank per mode");
  p_cmd->add_option("--tt", raw.tt, "N-1 interior ranks");

  std::vector<std::string> args = args_in;
  try {
    // Config values fill in flags the command line left out.
    std::string config_path;
    for (std::size_t a = 1; a < args.size(); ++a) {
      if (args[a] == "--config" && a + 1 < args.size()) config_path = args[a + 1];
      if (args[a].rfind("--config=", 0) == 0) config_path = args[a].substr(9);
    }
    if (!config_path.empty()) {
      const auto cfg = read_config(config_path);
      CLI::App* sub = nullptr;
      for (const auto& a : args)
        for (auto* candidate : {s_cmd, m_cmd, c_cmd, e_cmd, p_cmd})
          if (!sub && candidate->get_name() == a) sub = candidate;
      std::map<std::string, std::string> relevant;
      std::vector<std::string> switches;
      if (sub)
        for (const auto& [key, value] : cfg)
          if (const auto* o = sub->get_option_no_throw("--" + key)) {
            relevant[key] = value;
            if (o->get_expected_min() == 0) switches.push_back(key);
          }
      args = merge_config(args, relevant, switches);
    }

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }

  if (raw.simd != "auto" && !simd::select(raw.simd == "scalar" ? simd::Isa::scalar : simd::Isa::avx2)) {
    err << "error: " << raw.simd << " kernels are not available on this machine\n";
    return kInputError;
  }

  return guarded(err, [&]() -> int {
    if (s_cmd->parsed()) {
      synth.shape = parse_shape(raw.shape);
      synth.ranks = raw.ranks;
      synth.out = synth_out;
      if (!synth_factors.empty()) synth.factors_out = synth_factors;
      return cmd_synth(synth, out, err);
    }
    if (m_cmd->parsed()) {
      if (!raw.shape.empty()) mask.shape = parse_shape(raw.shape);
      if (!mask_input.empty()) mask.input = mask_input;
      mask.kind = raw.kind == "fiber" ? MaskKind::fiber : MaskKind::random;
      mask.out = mask_out;
      return cmd_mask(mask, out, err);
    }
    if (c_cmd->parsed()) {
      complete.input = c_input;
      complete.mask = c_mask;
      complete.ranks = raw.ranks;
      complete.out = c_out;
      if (c_scale->count() > 0) complete.solver.init_scale = raw.init_scale;
      if (!c_trace.empty()) complete.trace = c_trace;
      return cmd_complete(complete, out, err);
    }
    if (e_cmd->parsed()) {
      eval.truth = e_truth;
      eval.recovered = e_rec;
      if (!e_mask.empty()) eval.mask = e_mask;
      eval.metrics.clear();
      std::stringstream ss(raw.metrics);
      for (std::string m; std::getline(ss, m, ',');)
        if (!m.empty()) eval.metrics.push_back(m);
      return cmd_eval(eval, out, err);
    }
    params.shape = parse_shape(raw.shape);
    if (!raw.ranks.empty()) params.ranks = raw.ranks;
    if (!raw.ifctn.empty()) params.ifctn = raw.ifctn;
    if (!raw.fctn.empty()) params.fctn = raw.fctn;
    if (!raw.tucker.empty()) params.tucker = parse_size_list(raw.tucker);
    if (!raw.tt.empty()) params.tt = parse_size_list(raw.tt);
    return cmd_params(params, out, err);
  });
}

}  // namespace cherrynet::cli
