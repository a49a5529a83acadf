#pragma once

// Command-line front end. Kept in a header so tests can run commands
// in-process.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lsdf/all.hpp"

namespace lsdf::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
  kOk = 0,
  kViolations = 1,
  kBadInput = 2,
  kNonConvergence = 3,
  kNumerical = 4,
};

class UsageError : public Error {
 public:
  using Error::Error;
};

/// Accepts "120", "20N" or "N" (N = bus count).
inline std::size_t parse_count(const std::string& spec, std::size_t n) {
  auto s = text::trim(spec);
  std::size_t mult = 1;
  if (!s.empty() && (s.back() == 'N' || s.back() == 'n')) {
    s.remove_suffix(1);
    mult = n;
    if (s.empty()) return n;
  }
  const auto v = text::parse_int(s);
  if (!v || *v <= 0) throw UsageError("invalid sample count '" + spec + "'");
  return static_cast<std::size_t>(*v) * mult;
}

inline std::vector<std::size_t> parse_schedule(const std::string& spec, std::size_t n) {
  std::vector<std::size_t> out;
  for (auto part : text::split(spec, ',')) out.push_back(parse_count(std::string(part), n));
  if (out.empty()) throw UsageError("empty schedule");
  return out;
}

/// A path to an existing file, or a bundled case name such as "case30".
inline fs::path resolve_case(const std::string& arg) {
  if (fs::exists(arg)) return arg;
#ifdef LSDF_CASE_DIR
  for (const char* ext : {".m", ".json"}) {
    const fs::path p = fs::path(LSDF_CASE_DIR) / (arg + ext);
    if (fs::exists(p)) return p;
  }
#endif
  throw IoError("case '" + arg + "' not found");
}

inline std::string run_tag(double R, std::size_t K, std::uint64_t seed) {
  return "R" + text::format_double(R) + "_K" + std::to_string(K) + "_s" + std::to_string(seed);
}

struct Context {
  std::ostream& out;
  std::ostream& err;

  void write(const fs::path& p, std::string_view body) const {
    write_text_file(p, body);
    out << "wrote " << p.generic_string() << "\n";
  }
};

struct Options {
  std::string case_arg;
  std::string out_dir = ".";
  unsigned jobs = 1;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> test_seed;
  double R = 0.4;
  std::string K = "20N";
  std::string K_test;
  bool freeze_eta = false;
  std::optional<int> slack_id;
  std::string samples_path;
  std::string factors_path;
  std::string json_out;
  std::string pf_out;
  double ridge = 0.0;
  std::string schedule = "N,2N,5N,10N,20N";
  std::string reference = "50N";
  std::size_t grid_points = 11;
};

inline void require_seed(const Options& o) {
  if (!o.seed) throw UsageError("--seed is required");
}

inline void check_R(double R) {
  if (!(R >= 0.0 && R < 1.0)) throw UsageError("--R must lie in [0, 1)");
}

inline std::optional<std::size_t> slack_index(const NetworkCase& nc, const Options& o) {
  if (!o.slack_id) return std::nullopt;
  const auto idx = nc.index_of(*o.slack_id);
  if (!idx) throw UsageError("--slack " + std::to_string(*o.slack_id) + " is not a bus of the case");
  return idx;
}

inline SamplingOptions sampling_options(const Options& o) {
  SamplingOptions s;
  s.jobs = o.jobs;
  if (o.freeze_eta) s.bus_eta_low = s.bus_eta_high = 1.0;
  return s;
}

inline void check_same_case(std::uint64_t a, const NetworkCase& nc, std::string_view what) {
  if (a != nc.hash()) {
    throw DimensionError(std::string(what) + " was produced from a different case than " + nc.name());
  }
}

inline int cmd_validate(const Context& cx, const Options& o) {
  const auto nc = load_case(resolve_case(o.case_arg));
  cx.out << nc.name() << ": " << nc.bus_count() << " buses, " << nc.branch_count() << " branches, "
         << nc.generators().size() << " generators, hash " << format_hash(nc.hash()) << "\n";
  for (const auto& s : branch_parameter_summary(nc)) {
    cx.out << "  " << to_string(s.branch_class) << "s: " << s.count << ", mean r "
           << text::format_fixed(s.mean_r, 4) << ", mean x " << text::format_fixed(s.mean_x, 4)
           << ", mean b " << text::format_fixed(s.mean_b, 4) << ", x/r "
           << text::format_fixed(s.mean_x_over_r, 2) << "\n";
  }
  if (!o.json_out.empty()) cx.write(o.json_out, serialize_case_json(nc));
  const auto violations = validate(nc);
  if (violations.empty()) {
    cx.out << "valid\n";
    return kOk;
  }
  for (const auto& v : violations) cx.out << "violation [" << v.code << "] " << v.message << "\n";
  return kViolations;
}

inline int cmd_pf(const Context& cx, const Options& o) {
  const auto nc = load_case(resolve_case(o.case_arg));
  const PowerFlowSolver solver(nc);
  const auto sol = solver.solve_nominal();
  const auto body = power_flow_json(sol, nc);
  if (o.pf_out.empty()) {
    cx.out << body;
  } else {
    cx.write(o.pf_out, body);
  }
  if (!sol.converged) {
    cx.err << "power flow did not converge: " << to_string(sol.status) << "\n";
    return kNonConvergence;
  }
  return kOk;
}

inline int cmd_sample(const Context& cx, const Options& o) {
  require_seed(o);
  check_R(o.R);
  const auto nc = load_case(resolve_case(o.case_arg));
  const auto K = parse_count(o.K, nc.bus_count());
  const auto set = generate_samples(nc, o.R, K, *o.seed, sampling_options(o));
  cx.out << nc.name() << ": " << set.size() << " scenarios, " << set.rejected_count
         << " rejected draws\n";
  cx.write(fs::path(o.out_dir) / "samples" / (nc.name() + "_" + run_tag(o.R, K, *o.seed) + ".csv"),
           serialize_samples(set));
  return kOk;
}

inline int cmd_ptdf(const Context& cx, const Options& o) {
  const auto nc = load_case(resolve_case(o.case_arg));
  const auto p = compute_ptdf(nc, slack_index(nc, o));
  const auto stem = nc.name() + "_ptdf_slack" + std::to_string(nc.external_id(p.slack_bus));
  const auto dir = fs::path(o.out_dir);
  cx.write(dir / "factors" / (stem + ".csv"), ptdf_csv(p, nc));
  cx.write(dir / "factors" / (stem + ".json"), ptdf_sidecar(p, nc));
  cx.write(dir / "reports" / (stem + "_histogram.csv"), histogram_csv(factor_histogram(p.values)));
  return kOk;
}

inline SampleSet load_samples(const std::string& path) {
  if (path.empty()) throw UsageError("--samples is required");
  return parse_samples(read_text_file(path));
}

inline int cmd_fit(const Context& cx, const Options& o) {
  const auto nc = load_case(resolve_case(o.case_arg));
  const auto set = load_samples(o.samples_path);
  check_same_case(set.case_hash, nc, "sample file");
  LsdfSolveOptions so;
  so.jobs = o.jobs;
  so.ridge = o.ridge;
  const auto x = fit(set, so);
  cx.out << nc.name() << ": LSDF from " << set.size() << " scenarios, rank(A) " << x.rank_of_A << "/"
         << nc.bus_count() << (x.regularization_used ? ", regularised" : "") << ", CI "
         << text::format_fixed(ci_indicator(x), 6) << "\n";
  cx.out << "  max column-sum deviation " << identifiable_column_sum_check(x).cwiseAbs().maxCoeff()
         << " (identifiable part)\n";
  const auto stem = nc.name() + "_lsdf_" + run_tag(set.R, set.size(), set.seed);
  const auto dir = fs::path(o.out_dir);
  cx.write(dir / "factors" / (stem + ".csv"), lsdf_csv(x, nc));
  cx.write(dir / "factors" / (stem + ".json"), lsdf_sidecar(x, nc));
  cx.write(dir / "reports" / (stem + "_histogram.csv"), histogram_csv(factor_histogram(x.values)));
  return kOk;
}

inline int cmd_evaluate(const Context& cx, const Options& o) {
  const auto nc = load_case(resolve_case(o.case_arg));
  if (o.factors_path.empty()) throw UsageError("--factors is required");
  const fs::path csv_path = o.factors_path;
  const auto csv = read_text_file(csv_path);
  const auto sidecar = read_text_file(fs::path(csv_path).replace_extension(".json"));
  const auto model = nlohmann::json::parse(sidecar).value("model", "");
  FactorMatrix fm;
  if (model == "LSDF") {
    fm = read_lsdf(csv, sidecar).factors();
  } else if (model == "PTDF") {
    fm = expand_ptdf(read_ptdf(csv, sidecar));
  } else {
    throw ParseError(1, "factor sidecar names unknown model '" + model + "'");
  }
  check_same_case(fm.case_hash, nc, "factor file");
  const auto set = load_samples(o.samples_path);
  check_same_case(set.case_hash, nc, "sample file");
  const auto rep = evaluate(fm, set, o.jobs);
  cx.out << error_report_table(rep, nc);
  const auto stem = csv_path.stem().string() + "_on_" + fs::path(o.samples_path).stem().string();
  const auto dir = fs::path(o.out_dir) / "reports";
  cx.write(dir / (stem + ".csv"), error_report_csv(rep, nc));
  nlohmann::ordered_json j = to_json(rep);
  j["worst"] = to_json(worst_branch_drilldown(rep, nc));
  cx.write(dir / (stem + ".json"), j.dump(2) + "\n");
  return kOk;
}

inline int cmd_compare(const Context& cx, const Options& o) {
  require_seed(o);
  check_R(o.R);
  const auto nc = load_case(resolve_case(o.case_arg));
  const auto k_train = parse_count(o.K, nc.bus_count());
  const auto k_test = parse_count(o.K_test.empty() ? o.K : o.K_test, nc.bus_count());
  CompareOptions co;
  co.sampling = sampling_options(o);
  co.solve.jobs = o.jobs;
  co.solve.ridge = o.ridge;
  co.slack = slack_index(nc, o);
  const auto c = compare(nc, o.R, k_train, k_test, *o.seed, o.test_seed.value_or(*o.seed + 1), co);
  cx.out << comparison_table(c, nc);

  const auto tag = run_tag(o.R, k_train, *o.seed);
  const auto dir = fs::path(o.out_dir);
  const auto stem = nc.name() + "_compare_" + tag;
  auto csv = error_report_csv(c.lsdf_report, nc);
  const auto ptdf_rows = error_report_csv(c.ptdf_report, nc);
  csv += ptdf_rows.substr(ptdf_rows.find('\n') + 1);
  cx.write(dir / "reports" / (stem + ".csv"), csv);
  cx.write(dir / "reports" / (stem + ".json"), comparison_json(c, nc));
  cx.write(dir / "factors" / (nc.name() + "_lsdf_" + tag + ".csv"), lsdf_csv(c.lsdf, nc));
  cx.write(dir / "factors" / (nc.name() + "_lsdf_" + tag + ".json"), lsdf_sidecar(c.lsdf, nc));
  cx.write(dir / "reports" / (stem + "_histogram_lsdf.csv"),
           histogram_csv(factor_histogram(c.lsdf.values)));
  cx.write(dir / "reports" / (stem + "_histogram_ptdf.csv"),
           histogram_csv(factor_histogram(c.ptdf.values)));
  return kOk;
}

inline int cmd_converge(const Context& cx, const Options& o) {
  require_seed(o);
  check_R(o.R);
  const auto nc = load_case(resolve_case(o.case_arg));
  const auto schedule = parse_schedule(o.schedule, nc.bus_count());
  auto sopts = sampling_options(o);
  SampleSet reference;
  std::string ref_tag;
  if (o.reference == "grid") {
    reference = enumerate_grid_samples(nc, o.R, o.grid_points, sopts);
    ref_tag = "grid" + std::to_string(o.grid_points);
  } else {
    const auto k_ref = parse_count(o.reference, nc.bus_count());
    reference = generate_samples(nc, o.R, k_ref, *o.seed, sopts);
    ref_tag = "ref" + std::to_string(k_ref);
  }
  LsdfSolveOptions so;
  so.jobs = o.jobs;
  so.ridge = o.ridge;
  const auto curve = convergence_study(reference, schedule, *o.seed, so);
  cx.out << nc.name() << ": reference of " << curve.reference_size << " scenarios, CI "
         << text::format_fixed(curve.reference_ci, 6) << "\n";
  for (const auto& p : curve.points) {
    cx.out << "  K=" << p.K << "  CI " << text::format_fixed(p.ci, 6) << "  ("
           << text::format_fixed(100.0 * (p.ci / curve.reference_ci - 1.0), 2) << "%)  avg err "
           << text::format_fixed(p.avg_err, 5) << " MW\n";
  }
  cx.write(fs::path(o.out_dir) / "reports" /
               (nc.name() + "_converge_R" + text::format_double(o.R) + "_" + ref_tag + "_s" +
                std::to_string(*o.seed) + ".csv"),
           convergence_csv(curve));
  return kOk;
}

/// Runs one command line. argv[0] is the program name.
inline int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Least-squares distribution factors from AC power flow samples", "lsdf"};
  app.require_subcommand(1);
  Options o;

  auto add_case = [&](CLI::App* c) {
    c->add_option("case", o.case_arg, "Case file (MATPOWER .m or JSON) or bundled case name")->required();
  };
  auto add_out_dir = [&](CLI::App* c) {
    c->add_option("--out-dir", o.out_dir, "Root of the samples/, factors/, reports/ tree")->capture_default_str();
  };
  auto add_jobs = [&](CLI::App* c) {
    c->add_option("--jobs", o.jobs, "Worker threads; results do not depend on it")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
  };
  auto add_seed = [&](CLI::App* c) { c->add_option("--seed", o.seed, "Random seed (required)")->required(); };
  auto add_R = [&](CLI::App* c) {
    c->add_option("-R,--R", o.R, "Load variation range, loads scaled within [1-R, 1] of max load")
        ->capture_default_str();
  };

  auto* validate_cmd = app.add_subcommand("validate", "Parse and check a case");
  add_case(validate_cmd);
  validate_cmd->add_option("--json-out", o.json_out, "Write the canonical JSON form of the case here");

  auto* pf_cmd = app.add_subcommand("pf", "Solve the AC power flow at max load");
  add_case(pf_cmd);
  pf_cmd->add_option("--out", o.pf_out, "Write the JSON solution here instead of stdout");

  auto* sample_cmd = app.add_subcommand("sample", "Draw a random sample set");
  add_case(sample_cmd);
  add_R(sample_cmd);
  sample_cmd->add_option("-K,--K", o.K, "Scenario count, absolute or a multiple of N such as 20N")
      ->capture_default_str();
  add_seed(sample_cmd);
  sample_cmd->add_flag("--freeze-eta", o.freeze_eta, "Fix the per-bus load coefficients at 1");
  add_jobs(sample_cmd);
  add_out_dir(sample_cmd);

  auto* ptdf_cmd = app.add_subcommand("ptdf", "Compute DC PTDF");
  add_case(ptdf_cmd);
  ptdf_cmd->add_option("--slack", o.slack_id, "External id of the slack bus (default: case slack)");
  add_out_dir(ptdf_cmd);

  auto* fit_cmd = app.add_subcommand("fit", "Fit LSDF to a sample file");
  add_case(fit_cmd);
  fit_cmd->add_option("--samples", o.samples_path, "Sample file written by 'sample'")->required();
  fit_cmd->add_option("--ridge", o.ridge, "Tikhonov term added to A (0 = none)")->capture_default_str();
  add_jobs(fit_cmd);
  add_out_dir(fit_cmd);

  auto* eval_cmd = app.add_subcommand("evaluate", "Score a factor matrix on a sample file");
  add_case(eval_cmd);
  eval_cmd->add_option("--factors", o.factors_path, "Factor CSV; its .json sidecar must sit next to it")
      ->required();
  eval_cmd->add_option("--samples", o.samples_path, "Sample file to evaluate on")->required();
  add_jobs(eval_cmd);
  add_out_dir(eval_cmd);

  auto* compare_cmd = app.add_subcommand("compare", "Fit LSDF and compare it with PTDF on a fresh test set");
  add_case(compare_cmd);
  add_R(compare_cmd);
  compare_cmd->add_option("-K,--K", o.K, "Training scenario count, absolute or e.g. 20N")->capture_default_str();
  compare_cmd->add_option("--K-test", o.K_test, "Test scenario count (default: same as --K)");
  add_seed(compare_cmd);
  compare_cmd->add_option("--test-seed", o.test_seed, "Seed of the test set (default: seed + 1)");
  compare_cmd->add_option("--slack", o.slack_id, "External id of the PTDF slack bus");
  compare_cmd->add_option("--ridge", o.ridge, "Tikhonov term added to A (0 = none)")->capture_default_str();
  compare_cmd->add_flag("--freeze-eta", o.freeze_eta, "Fix the per-bus load coefficients at 1");
  add_jobs(compare_cmd);
  add_out_dir(compare_cmd);

  auto* converge_cmd = app.add_subcommand("converge", "Track the fit as the sample count grows");
  add_case(converge_cmd);
  add_R(converge_cmd);
  converge_cmd->add_option("--schedule", o.schedule, "Comma-separated sample counts, e.g. N,2N,5N")
      ->capture_default_str();
  converge_cmd->add_option("--reference", o.reference, "'grid' or a random reference size such as 50N")
      ->capture_default_str();
  converge_cmd->add_option("--grid-points", o.grid_points, "Levels per load bus for --reference grid")
      ->check(CLI::Range(2, 1000))
      ->capture_default_str();
  add_seed(converge_cmd);
  converge_cmd->add_option("--ridge", o.ridge, "Tikhonov term added to A (0 = none)")->capture_default_str();
  add_jobs(converge_cmd);
  add_out_dir(converge_cmd);

  std::vector<std::string> args(argv.begin() + (argv.empty() ? 0 : 1), argv.end());
  std::reverse(args.begin(), args.end());  // CLI11 consumes a reversed vector
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    // Help requests exit 0; CLI11 prints the help of the selected subcommand.
    return app.exit(e, out, err) == 0 ? kOk : kBadInput;
  }

  const Context cx{out, err};
  try {
    if (*validate_cmd) return cmd_validate(cx, o);
    if (*pf_cmd) return cmd_pf(cx, o);
    if (*sample_cmd) return cmd_sample(cx, o);
    if (*ptdf_cmd) return cmd_ptdf(cx, o);
    if (*fit_cmd) return cmd_fit(cx, o);
    if (*eval_cmd) return cmd_evaluate(cx, o);
    if (*compare_cmd) return cmd_compare(cx, o);
    if (*converge_cmd) return cmd_converge(cx, o);
  } catch (const SamplingError& e) {
    err << "error: " << e.what() << "\n";
    return kNonConvergence;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kNumerical;
  } catch (const Error& e) {  // parse, io, case, dimension, usage
    err << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kNumerical;
  }
  return kBadInput;
}

}  // namespace lsdf::cli
