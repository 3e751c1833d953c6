#include "sipcq/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "sipcq/instance_io.hpp"
#include "sipcq/report.hpp"

namespace sipcq {

namespace {

struct Options {
  std::string instance;
  std::string point;
  std::string eps_schedule;
  double margin_tol = 1e-6;
  long long truncation = 0;
  std::vector<std::string> variants{"perturbed", "unperturbed"};
  int probe_dirs = 16;
  int probe_samples = 2000;
  double probe_radius = 1e-3;
  std::string report = "text";
  std::string output;
  std::uint64_t seed = 12345;
  bool seed_given = false;
  bool deterministic = false;
  std::string slater;
  int max_iters = 0;
};

class ValidationError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

Vec parse_list(const std::string& text, const char* what) {
  Vec out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ValidationError(std::string("bad number in ") + what + ": '" + item + "'");
    }
  }
  return out;
}

ConeVariant parse_variant(const std::string& s) {
  if (s == "perturbed") return ConeVariant::Perturbed;
  if (s == "unperturbed") return ConeVariant::Unperturbed;
  if (s == "normalized") return ConeVariant::Normalized;
  throw ValidationError("unknown variant '" + s + "'");
}

std::vector<Vec> probe_directions(int n, int count, std::uint64_t seed) {
  std::vector<Vec> dirs;
  if (n == 2) {
    for (int k = 0; k < count; ++k) {
      const double a = 2.0 * std::numbers::pi * k / count;
      dirs.push_back({std::cos(a), std::sin(a)});
    }
    return dirs;
  }
  for (int i = 0; i < n && static_cast<int>(dirs.size()) < count; ++i) {
    for (double s : {1.0, -1.0}) {
      if (static_cast<int>(dirs.size()) >= count) break;
      Vec d(n, 0.0);
      d[i] = s;
      dirs.push_back(d);
    }
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  while (static_cast<int>(dirs.size()) < count) {
    Vec d(n);
    for (auto& v : d) v = normal(rng);
    const double len = norm2(d);
    if (len == 0) continue;
    for (auto& v : d) v /= len;
    dirs.push_back(d);
  }
  return dirs;
}

std::string timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json echo(const Options& o, const CqOptions& cq, const std::string& command) {
  return {{"command", command},
          {"point", o.point},
          {"eps_schedule", cq.eps_schedule},
          {"margin_tol", cq.margin_tol},
          {"truncation", o.truncation},
          {"variants", o.variants},
          {"probe_dirs", o.probe_dirs},
          {"probe_samples", o.probe_samples},
          {"probe_radius", o.probe_radius},
          {"report", o.report},
          {"seed", cq.seed},
          {"deterministic", o.deterministic},
          {"slater", o.slater},
          {"max_iters", o.max_iters}};
}

// Analysis at a feasible point. Returns an exit code.
int analyze_into(ReportDocument& doc, const SipInstance& inst, const Vec& x, const Options& o,
                 const CqOptions& cqo, std::ostream& err) {
  doc.point = x;
  doc.feasibility = feasibility_check(inst, x);
  if (!doc.feasibility.feasible) {
    err << "infeasible point: max violation " << doc.feasibility.max_violation;
    if (doc.feasibility.worst) err << " at " << label_text(inst, *doc.feasibility.worst);
    if (doc.feasibility.equality_residual > kFeasibilityTol)
      err << ", equality residual " << doc.feasibility.equality_residual;
    err << "\n";
    return kExitInfeasible;
  }
  std::optional<Vec> slater;
  if (!o.slater.empty()) {
    slater = parse_list(o.slater, "--slater");
    if (static_cast<int>(slater->size()) != inst.n) throw ValidationError("--slater has the wrong dimension");
  }
  const PointAnalysis pa = analyze_point(inst, x);
  doc.cq = cq_summary(inst, pa, cqo, slater);
  OptimalityOptions oo;
  oo.cq = cqo;

  std::optional<NormalConeProbe> probe;
  std::vector<Vec> dirs;
  if (o.probe_dirs > 0) {
    probe.emplace(inst, x, o.probe_samples, o.probe_radius, cqo.seed);
    dirs = probe_directions(inst.n, o.probe_dirs, cqo.seed);
  }
  for (const auto& name : o.variants) {
    const NormalConeRep rep = normal_cone(inst, pa, doc.cq, parse_variant(name), oo);
    ConeSummary s = summarize(rep);
    for (const auto& d : dirs) {
      ProbeEntry e;
      e.direction = d;
      e.in_cone = membership(rep.stabilized, d, oo.membership_tol, true).status == FeasibilityStatus::Member;
      e.probe = probe->quotient(d);
      s.probes.push_back(std::move(e));
    }
    doc.cones.push_back(std::move(s));
  }
  doc.stationarity.push_back(verify_kkt(inst, pa, oo));
  doc.stationarity.push_back(verify_perturbed_stationarity(inst, pa, oo));
  if (inst.convex) doc.stationarity.push_back(convex_global_check(inst, pa, doc.cq, oo));
  for (const auto& s : doc.stationarity)
    if (s.lp_failure) return kExitLpFailure;
  return kExitOk;
}

void emit(const ReportDocument& doc, const Options& o, std::ostream& out) {
  const bool text = o.report == "text" || o.report == "both";
  const bool json = o.report == "json" || o.report == "both";
  if (text) out << render_text(doc);
  if (json) {
    const std::string body = to_json(doc).dump(2) + "\n";
    if (!o.output.empty()) {
      std::ofstream f(o.output);
      if (!f) throw ValidationError("cannot write " + o.output);
      f << body;
    } else {
      out << body;
    }
  }
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("instance", o.instance, "instance file")->required();
  cmd->add_option("--eps-schedule", o.eps_schedule, "comma-separated eps values");
  cmd->add_option("--margin-tol", o.margin_tol, "PMFCQ margin tolerance")->check(CLI::PositiveNumber);
  cmd->add_option("--truncation", o.truncation, "countable index truncation")->check(CLI::PositiveNumber);
  cmd->add_option("--variant", o.variants, "perturbed|unperturbed|normalized")
      ->delimiter(',')
      ->check(CLI::IsMember({"perturbed", "unperturbed", "normalized"}));
  cmd->add_option("--probe-dirs", o.probe_dirs, "number of probe directions")->check(CLI::NonNegativeNumber);
  cmd->add_option("--probe-samples", o.probe_samples, "probe samples")->check(CLI::PositiveNumber);
  cmd->add_option("--probe-radius", o.probe_radius, "probe radius")->check(CLI::PositiveNumber);
  cmd->add_option("--report", o.report, "json|text|both")->check(CLI::IsMember({"json", "text", "both"}));
  cmd->add_option("--output", o.output, "write the JSON report to this file");
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_flag("--deterministic", o.deterministic, "omit the timestamp");
  cmd->add_option("--slater", o.slater, "candidate Slater point");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Constraint qualifications and stationarity for semi-infinite programs", "sipcq"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  Options o;
  auto* analyze = app.add_subcommand("analyze", "analyze a point");
  add_common(analyze, o);
  analyze->add_option("--point", o.point, "comma-separated point")->required();
  auto* solve_cmd = app.add_subcommand("solve", "solve, then analyze the candidate");
  add_common(solve_cmd, o);
  solve_cmd->add_option("--max-iters", o.max_iters, "outer iteration limit")->check(CLI::PositiveNumber);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::Success&) {
    out << (app.get_help_ptr()->count() ? app.help() : std::string(kToolVersion) + "\n");
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    if (e.get_exit_code() == 0) return kExitOk;
    return kExitValidation;
  }
  for (const auto* cmd : {analyze, solve_cmd})
    if (cmd->get_option("--seed")->count()) o.seed_given = true;

  try {
    std::ifstream in(o.instance);
    if (!in) throw ValidationError("cannot read " + o.instance);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    SipInstance inst = parse_instance(text);
    if (o.truncation > 0) set_truncation(inst, o.truncation);
    inst.validate();

    CqOptions cqo;
    if (!o.eps_schedule.empty()) {
      cqo.eps_schedule = parse_list(o.eps_schedule, "--eps-schedule");
      if (cqo.eps_schedule.empty()) throw ValidationError("empty --eps-schedule");
      for (double e : cqo.eps_schedule)
        if (!(e > 0)) throw ValidationError("eps values must be positive");
    }
    cqo.margin_tol = o.margin_tol;
    cqo.seed = o.seed;

    ReportDocument doc;
    doc.instance_digest = instance_digest(text);
    doc.instance_path = o.instance;
    if (!o.deterministic) doc.generated_at = timestamp();
    doc.parameters = echo(o, cqo, analyze->parsed() ? "analyze" : "solve");

    int code = kExitOk;
    if (analyze->parsed()) {
      const Vec x = parse_list(o.point, "--point");
      if (static_cast<int>(x.size()) != inst.n)
        throw ValidationError("--point has " + std::to_string(x.size()) + " components, instance has " +
                              std::to_string(inst.n));
      code = analyze_into(doc, inst, x, o, cqo, err);
      if (code == kExitInfeasible) return code;
    } else {
      SolverConfig cfg = SolverConfig::from_instance(inst);
      if (o.max_iters > 0) cfg.max_outer = o.max_iters;
      if (o.seed_given) cfg.seed = o.seed;
      const SolveResult res = solve(inst, cfg);
      doc.solver = res.trace;
      if (res.trace.status == SolverStatus::IterationLimit) {
        doc.point = res.x;
        doc.feasibility = feasibility_check(inst, res.x);
        emit(doc, o, out);
        err << "solver stopped at the iteration limit (" << cfg.max_outer << " outer iterations)\n";
        return kExitSolverLimit;
      }
      code = analyze_into(doc, inst, res.x, o, cqo, err);
      if (code == kExitInfeasible) return code;
    }
    emit(doc, o, out);
    if (code == kExitLpFailure) err << "an LP hit its iteration limit\n";
    return code;
  } catch (const InstanceError& e) {
    err << o.instance << ":" << e.line() << ": " << e.what() << "\n";
    return kExitValidation;
  } catch (const ValidationError& e) {
    err << e.what() << "\n";
    return kExitValidation;
  } catch (const ParseError& e) {
    err << "expression error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    err << e.what() << "\n";
    return kExitValidation;
  }
}

}  // namespace sipcq
