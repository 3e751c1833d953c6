#include "sipcq/report.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace sipcq {

using nlohmann::json;

namespace {

json num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double get_num(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    if (s == "nan") return std::nan("");
    throw std::invalid_argument("bad number '" + s + "'");
  }
  return j.get<double>();
}

json vec(const Vec& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

Vec get_vec(const json& j) {
  Vec v;
  for (const auto& e : j) v.push_back(get_num(e));
  return v;
}

json vecs(const std::vector<Vec>& vs) {
  json a = json::array();
  for (const auto& v : vs) a.push_back(vec(v));
  return a;
}

std::vector<Vec> get_vecs(const json& j) {
  std::vector<Vec> out;
  for (const auto& e : j) out.push_back(get_vec(e));
  return out;
}

template <typename E, std::size_t N>
E enum_from(const json& j, const E (&values)[N]) {
  const auto s = j.get<std::string>();
  for (E v : values)
    if (s == to_string(v)) return v;
  throw std::invalid_argument("unknown enum value '" + s + "'");
}

constexpr Verdict kVerdicts[] = {Verdict::Holds, Verdict::Fails, Verdict::Unknown};
constexpr Closedness kClosedness[] = {Closedness::Closed, Closedness::NotClosed, Closedness::Unknown};
constexpr RayOrigin kOrigins[] = {RayOrigin::Declared, RayOrigin::Extrapolated};
constexpr ConeVariant kVariants[] = {ConeVariant::Perturbed, ConeVariant::Unperturbed, ConeVariant::Normalized};
constexpr Condition kConditions[] = {Condition::UnperturbedKKT, Condition::PerturbedStationarity,
                                     Condition::ConvexGlobal};
constexpr Outcome kOutcomes[] = {Outcome::CertificateFound, Outcome::Refuted, Outcome::Inconclusive};
constexpr FeasibilityStatus kFeasibility[] = {FeasibilityStatus::Member, FeasibilityStatus::Separated,
                                              FeasibilityStatus::Failed};
constexpr SolverStatus kSolverStatus[] = {SolverStatus::Converged, SolverStatus::IterationLimit};

json label_json(const IndexLabel& l) { return {{"constraint", l.constraint}, {"t", num(l.t)}, {"limit", l.limit}, {"end", l.end}}; }

IndexLabel get_label(const json& j) {
  return {j.at("constraint").get<int>(), get_num(j.at("t")), j.at("limit").get<bool>(), j.at("end").get<int>()};
}

json ray_json(const LimitRay& r) {
  return {{"label", r.label},
          {"direction", vec(r.direction)},
          {"origin", to_string(r.origin)},
          {"attained", r.attained},
          {"residual", num(r.residual)}};
}

LimitRay get_ray(const json& j) {
  LimitRay r;
  r.label = j.at("label").get<std::string>();
  r.direction = get_vec(j.at("direction"));
  r.origin = enum_from(j.at("origin"), kOrigins);
  r.attained = j.at("attained").get<bool>();
  r.residual = get_num(j.at("residual"));
  return r;
}

json rays_json(const std::vector<LimitRay>& rs) {
  json a = json::array();
  for (const auto& r : rs) a.push_back(ray_json(r));
  return a;
}

std::vector<LimitRay> get_rays(const json& j) {
  std::vector<LimitRay> out;
  for (const auto& e : j) out.push_back(get_ray(e));
  return out;
}

json cone_json(const GeneratedCone& c) {
  json gens = json::array();
  for (const auto& g : c.generators) gens.push_back({{"label", g.label}, {"v", vec(g.v)}});
  return {{"dimension", c.dimension},
          {"generators", gens},
          {"lineality", vecs(c.lineality)},
          {"rays", rays_json(c.rays)},
          {"closedness", to_string(c.closedness)}};
}

GeneratedCone get_cone(const json& j) {
  GeneratedCone c;
  c.dimension = j.at("dimension").get<int>();
  for (const auto& g : j.at("generators")) c.generators.push_back({g.at("label").get<std::string>(), get_vec(g.at("v"))});
  c.lineality = get_vecs(j.at("lineality"));
  c.rays = get_rays(j.at("rays"));
  c.closedness = enum_from(j.at("closedness"), kClosedness);
  return c;
}

json cq_json(const CqReport& cq) {
  json j;
  j["emfcq"] = {{"verdict", to_string(cq.emfcq.verdict)}, {"rank", cq.emfcq.rank},
                {"m", cq.emfcq.m},                         {"witness", vec(cq.emfcq.witness)},
                {"margin", num(cq.emfcq.margin)},          {"active_count", cq.emfcq.active_count}};
  json trace = json::array();
  for (const auto& s : cq.pmfcq.trace) {
    trace.push_back({{"eps", num(s.eps)},
                     {"level", s.level},
                     {"generators", s.generators},
                     {"margin", num(s.margin)},
                     {"smallest_t", num(s.smallest_t)},
                     {"witness", vec(s.witness)}});
  }
  j["pmfcq"] = {{"verdict", to_string(cq.pmfcq.verdict)},
                {"trace", trace},
                {"stabilized_eps", cq.pmfcq.stabilized_eps ? num(*cq.pmfcq.stabilized_eps) : json(nullptr)},
                {"witness", vec(cq.pmfcq.witness)},
                {"margin", num(cq.pmfcq.margin)}};
  const auto& cl = cq.nfmcq.closedness;
  json witness = nullptr;
  if (cl.witness) {
    witness = {{"ray_label", cl.witness->ray_label},
               {"ray", vec(cl.witness->ray)},
               {"functional", vec(cl.witness->functional)},
               {"margin", num(cl.witness->margin)}};
  }
  j["nfmcq"] = {{"verdict", to_string(cq.nfmcq.verdict)},
                {"closedness",
                 {{"status", to_string(cl.status)},
                  {"witness", witness},
                  {"reason", cl.reason},
                  {"norm_ratio", num(cl.norm_ratio)},
                  {"min_norm", num(cl.min_norm)},
                  {"band_ok", cl.band_ok},
                  {"margin", num(cl.margin)}}},
                {"inequality_part_only", cq.nfmcq.inequality_part_only},
                {"generators", cq.nfmcq.generators},
                {"rays", rays_json(cq.nfmcq.rays)}};
  j["ssc"] = {{"verdict", to_string(cq.ssc.verdict)},
              {"slater_point", cq.ssc.slater_point ? vec(*cq.ssc.slater_point) : json(nullptr)},
              {"sup_value", num(cq.ssc.sup_value)},
              {"equality_residual", num(cq.ssc.equality_residual)},
              {"reason", cq.ssc.reason}};
  j["diagnostics"] = cq.diagnostics;
  return j;
}

CqReport get_cq(const json& j) {
  CqReport cq;
  const auto& e = j.at("emfcq");
  cq.emfcq.verdict = enum_from(e.at("verdict"), kVerdicts);
  cq.emfcq.rank = e.at("rank").get<int>();
  cq.emfcq.m = e.at("m").get<int>();
  cq.emfcq.witness = get_vec(e.at("witness"));
  cq.emfcq.margin = get_num(e.at("margin"));
  cq.emfcq.active_count = e.at("active_count").get<int>();
  const auto& p = j.at("pmfcq");
  cq.pmfcq.verdict = enum_from(p.at("verdict"), kVerdicts);
  for (const auto& s : p.at("trace")) {
    MarginSample m;
    m.eps = get_num(s.at("eps"));
    m.level = s.at("level").get<int>();
    m.generators = s.at("generators").get<int>();
    m.margin = get_num(s.at("margin"));
    m.smallest_t = get_num(s.at("smallest_t"));
    m.witness = get_vec(s.at("witness"));
    cq.pmfcq.trace.push_back(std::move(m));
  }
  if (!p.at("stabilized_eps").is_null()) cq.pmfcq.stabilized_eps = get_num(p.at("stabilized_eps"));
  cq.pmfcq.witness = get_vec(p.at("witness"));
  cq.pmfcq.margin = get_num(p.at("margin"));
  const auto& n = j.at("nfmcq");
  cq.nfmcq.verdict = enum_from(n.at("verdict"), kVerdicts);
  const auto& c = n.at("closedness");
  auto& cl = cq.nfmcq.closedness;
  cl.status = enum_from(c.at("status"), kClosedness);
  if (!c.at("witness").is_null()) {
    const auto& w = c.at("witness");
    cl.witness = ClosednessWitness{w.at("ray_label").get<std::string>(), get_vec(w.at("ray")),
                                   get_vec(w.at("functional")), get_num(w.at("margin"))};
  }
  cl.reason = c.at("reason").get<std::string>();
  cl.norm_ratio = get_num(c.at("norm_ratio"));
  cl.min_norm = get_num(c.at("min_norm"));
  cl.band_ok = c.at("band_ok").get<bool>();
  cl.margin = get_num(c.at("margin"));
  cq.nfmcq.inequality_part_only = n.at("inequality_part_only").get<bool>();
  cq.nfmcq.generators = n.at("generators").get<int>();
  cq.nfmcq.rays = get_rays(n.at("rays"));
  const auto& s = j.at("ssc");
  cq.ssc.verdict = enum_from(s.at("verdict"), kVerdicts);
  if (!s.at("slater_point").is_null()) cq.ssc.slater_point = get_vec(s.at("slater_point"));
  cq.ssc.sup_value = get_num(s.at("sup_value"));
  cq.ssc.equality_residual = get_num(s.at("equality_residual"));
  cq.ssc.reason = s.at("reason").get<std::string>();
  cq.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
  return cq;
}

json summary_json(const ConeSummary& c) {
  json probes = json::array();
  for (const auto& p : c.probes) {
    probes.push_back({{"direction", vec(p.direction)},
                      {"in_cone", p.in_cone},
                      {"conclusive", p.probe.conclusive},
                      {"quotient", num(p.probe.quotient)},
                      {"feasible_samples", p.probe.feasible_samples},
                      {"samples", p.probe.samples}});
  }
  json eps = json::array();
  for (double e : c.eps) eps.push_back(num(e));
  return {{"variant", to_string(c.variant)},
          {"valid", c.valid},
          {"regular", c.regular},
          {"limiting_identical", c.limiting_identical},
          {"warnings", c.warnings},
          {"eps", eps},
          {"generator_counts", c.generator_counts},
          {"ray_counts", c.ray_counts},
          {"stabilized", cone_json(c.stabilized)},
          {"stabilized_generators", c.stabilized_generators},
          {"probes", probes}};
}

ConeSummary get_summary(const json& j) {
  ConeSummary c;
  c.variant = enum_from(j.at("variant"), kVariants);
  c.valid = j.at("valid").get<bool>();
  c.regular = j.at("regular").get<bool>();
  c.limiting_identical = j.at("limiting_identical").get<bool>();
  c.warnings = j.at("warnings").get<std::vector<std::string>>();
  c.eps = get_vec(j.at("eps"));
  c.generator_counts = j.at("generator_counts").get<std::vector<int>>();
  c.ray_counts = j.at("ray_counts").get<std::vector<int>>();
  c.stabilized = get_cone(j.at("stabilized"));
  c.stabilized_generators = j.at("stabilized_generators").get<int>();
  for (const auto& p : j.at("probes")) {
    ProbeEntry e;
    e.direction = get_vec(p.at("direction"));
    e.in_cone = p.at("in_cone").get<bool>();
    e.probe.conclusive = p.at("conclusive").get<bool>();
    e.probe.quotient = get_num(p.at("quotient"));
    e.probe.feasible_samples = p.at("feasible_samples").get<int>();
    e.probe.samples = p.at("samples").get<int>();
    c.probes.push_back(std::move(e));
  }
  return c;
}

json stationarity_json(const StationarityReport& r) {
  json cert = nullptr;
  if (r.certificate) {
    json labels = json::array();
    for (const auto& l : r.certificate->support_labels) labels.push_back(label_json(l));
    cert = {{"support", r.certificate->support},
            {"support_labels", labels},
            {"lambda", vec(r.certificate->lambda)},
            {"y", vec(r.certificate->y)},
            {"cost_weights", vec(r.certificate->cost_weights)},
            {"residual", num(r.certificate->residual)}};
  }
  json trace = json::array();
  for (const auto& t : r.trace)
    trace.push_back({{"eps", num(t.eps)}, {"status", to_string(t.status)}, {"distance", num(t.distance)}});
  return {{"condition", to_string(r.condition)},
          {"outcome", to_string(r.outcome)},
          {"certificate", cert},
          {"separator", vec(r.separator)},
          {"trace", trace},
          {"global", r.global},
          {"lp_failure", r.lp_failure},
          {"note", r.note}};
}

StationarityReport get_stationarity(const json& j) {
  StationarityReport r;
  r.condition = enum_from(j.at("condition"), kConditions);
  r.outcome = enum_from(j.at("outcome"), kOutcomes);
  if (!j.at("certificate").is_null()) {
    const auto& c = j.at("certificate");
    KktCertificate k;
    k.support = c.at("support").get<std::vector<std::string>>();
    for (const auto& l : c.at("support_labels")) k.support_labels.push_back(get_label(l));
    k.lambda = get_vec(c.at("lambda"));
    k.y = get_vec(c.at("y"));
    k.cost_weights = get_vec(c.at("cost_weights"));
    k.residual = get_num(c.at("residual"));
    r.certificate = std::move(k);
  }
  r.separator = get_vec(j.at("separator"));
  for (const auto& t : j.at("trace"))
    r.trace.push_back({get_num(t.at("eps")), enum_from(t.at("status"), kFeasibility), get_num(t.at("distance"))});
  r.global = j.at("global").get<bool>();
  r.lp_failure = j.at("lp_failure").get<bool>();
  r.note = j.at("note").get<std::string>();
  return r;
}

json solver_json(const SolverTrace& t) {
  json its = json::array();
  for (const auto& i : t.iterations) {
    its.push_back({{"working_set", i.working_set},
                   {"x", vec(i.x)},
                   {"max_violation", num(i.max_violation)},
                   {"cost", num(i.cost)},
                   {"accepted", i.accepted}});
  }
  return {{"status", to_string(t.status)}, {"iterations", its}};
}

SolverTrace get_solver(const json& j) {
  SolverTrace t;
  t.status = enum_from(j.at("status"), kSolverStatus);
  for (const auto& i : j.at("iterations")) {
    SolverIteration it;
    it.working_set = i.at("working_set").get<std::vector<std::string>>();
    it.x = get_vec(i.at("x"));
    it.max_violation = get_num(i.at("max_violation"));
    it.cost = get_num(i.at("cost"));
    it.accepted = i.at("accepted").get<bool>();
    t.iterations.push_back(std::move(it));
  }
  return t;
}

}  // namespace

ConeSummary summarize(const NormalConeRep& rep, int max_listed) {
  ConeSummary s;
  s.variant = rep.variant;
  s.valid = rep.valid;
  s.regular = rep.regular;
  s.limiting_identical = rep.limiting.has_value();
  s.warnings = rep.warnings;
  for (const auto& c : rep.cones) {
    s.eps.push_back(c.eps);
    s.generator_counts.push_back(static_cast<int>(c.cone.generators.size()));
    s.ray_counts.push_back(static_cast<int>(c.cone.rays.size()));
  }
  s.stabilized = rep.stabilized;
  s.stabilized_generators = static_cast<int>(rep.stabilized.generators.size());
  if (static_cast<int>(s.stabilized.generators.size()) > max_listed) s.stabilized.generators.resize(max_listed);
  return s;
}

json to_json(const ReportDocument& doc) {
  json j;
  j["schema"] = kReportSchema;
  j["tool_version"] = doc.tool_version;
  j["instance_digest"] = doc.instance_digest;
  j["instance_path"] = doc.instance_path;
  j["point"] = vec(doc.point);
  j["feasibility"] = {{"max_violation", num(doc.feasibility.max_violation)},
                      {"equality_residual", num(doc.feasibility.equality_residual)},
                      {"feasible", doc.feasibility.feasible},
                      {"worst", doc.feasibility.worst ? label_json(*doc.feasibility.worst) : json(nullptr)}};
  j["cq"] = cq_json(doc.cq);
  json cones = json::array();
  for (const auto& c : doc.cones) cones.push_back(summary_json(c));
  j["normal_cones"] = cones;
  json st = json::array();
  for (const auto& s : doc.stationarity) st.push_back(stationarity_json(s));
  j["stationarity"] = st;
  j["solver"] = doc.solver ? solver_json(*doc.solver) : json(nullptr);
  j["parameters"] = doc.parameters;
  j["generated_at"] = doc.generated_at ? json(*doc.generated_at) : json(nullptr);
  return j;
}

ReportDocument report_from_json(const json& j) {
  if (j.at("schema").get<std::string>() != kReportSchema) throw std::invalid_argument("unsupported report schema");
  ReportDocument d;
  d.tool_version = j.at("tool_version").get<std::string>();
  d.instance_digest = j.at("instance_digest").get<std::string>();
  d.instance_path = j.at("instance_path").get<std::string>();
  d.point = get_vec(j.at("point"));
  const auto& f = j.at("feasibility");
  d.feasibility.max_violation = get_num(f.at("max_violation"));
  d.feasibility.equality_residual = get_num(f.at("equality_residual"));
  d.feasibility.feasible = f.at("feasible").get<bool>();
  if (!f.at("worst").is_null()) d.feasibility.worst = get_label(f.at("worst"));
  d.cq = get_cq(j.at("cq"));
  for (const auto& c : j.at("normal_cones")) d.cones.push_back(get_summary(c));
  for (const auto& s : j.at("stationarity")) d.stationarity.push_back(get_stationarity(s));
  if (!j.at("solver").is_null()) d.solver = get_solver(j.at("solver"));
  d.parameters = j.at("parameters");
  if (!j.at("generated_at").is_null()) d.generated_at = j.at("generated_at").get<std::string>();
  return d;
}

// ---------------------------------------------------------------------------
// Text

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

std::string fmt(const Vec& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s + ")";
}

}  // namespace

std::string render_text(const ReportDocument& doc) {
  std::ostringstream os;
  os << "sipcq " << doc.tool_version << "  instance " << doc.instance_path << " [" << doc.instance_digest << "]\n";
  if (doc.solver) {
    os << "solver: " << to_string(doc.solver->status) << " after " << doc.solver->iterations.size()
       << " outer iterations\n";
  }
  os << "point " << fmt(doc.point) << "  max violation " << fmt(doc.feasibility.max_violation) << "\n\n";
  const auto& cq = doc.cq;
  os << "EMFCQ  " << to_string(cq.emfcq.verdict) << "  margin " << fmt(cq.emfcq.margin) << "  witness "
     << fmt(cq.emfcq.witness) << "  rank " << cq.emfcq.rank << "/" << cq.emfcq.m << "\n";
  os << "PMFCQ  " << to_string(cq.pmfcq.verdict) << "  margin " << fmt(cq.pmfcq.margin);
  if (cq.pmfcq.stabilized_eps) os << "  stabilized eps " << fmt(*cq.pmfcq.stabilized_eps);
  os << "\n";
  for (const auto& s : cq.pmfcq.trace) {
    os << "    eps " << fmt(s.eps) << " level " << s.level << "  |T_eps| " << s.generators << "  margin "
       << fmt(s.margin);
    if (s.smallest_t > 0) os << "  min t " << fmt(s.smallest_t);
    os << "\n";
  }
  os << "NFMCQ  " << to_string(cq.nfmcq.verdict) << "  cone " << to_string(cq.nfmcq.closedness.status) << "  "
     << cq.nfmcq.closedness.reason << "\n";
  if (cq.nfmcq.closedness.witness) {
    const auto& w = *cq.nfmcq.closedness.witness;
    os << "    witness ray " << w.ray_label << " " << fmt(w.ray) << "  functional " << fmt(w.functional) << "\n";
  }
  os << "SSC    " << to_string(cq.ssc.verdict);
  if (cq.ssc.slater_point) os << "  slater point " << fmt(*cq.ssc.slater_point) << "  sup " << fmt(cq.ssc.sup_value);
  if (!cq.ssc.reason.empty()) os << "  " << cq.ssc.reason;
  os << "\n";
  for (const auto& d : cq.diagnostics) os << "  note: " << d << "\n";

  for (const auto& c : doc.cones) {
    os << "\nnormal cone (" << to_string(c.variant) << ")" << (c.valid ? "" : "  [not guaranteed]") << "\n";
    for (std::size_t i = 0; i < c.eps.size(); ++i) {
      os << "    eps " << fmt(c.eps[i]) << "  generators " << c.generator_counts[i] << "  rays " << c.ray_counts[i]
         << "\n";
    }
    os << "    stabilized: " << c.stabilized_generators << " generators, lineality "
       << c.stabilized.lineality.size() << ", closedness " << to_string(c.stabilized.closedness) << "\n";
    for (const auto& r : c.stabilized.rays)
      os << "    ray " << r.label << " " << fmt(r.direction) << " " << to_string(r.origin)
         << (r.attained ? " attained" : "") << "\n";
    os << "    regular " << (c.regular ? "yes (limiting cone identical)" : "no") << "\n";
    for (const auto& w : c.warnings) os << "    warning: " << w << "\n";
    if (!c.probes.empty()) {
      os << "    probe direction           in-cone  quotient\n";
      for (const auto& p : c.probes) {
        std::string d = fmt(p.direction);
        d.resize(std::max<std::size_t>(d.size(), 26), ' ');
        os << "    " << d << (p.in_cone ? "yes      " : "no       ")
           << (p.probe.conclusive ? fmt(p.probe.quotient) : std::string("inconclusive")) << "\n";
      }
    }
  }
  os << "\n";
  for (const auto& s : doc.stationarity) {
    os << to_string(s.condition) << ": " << to_string(s.outcome);
    if (s.global) os << "  [global]";
    os << "\n";
    if (s.certificate) {
      for (std::size_t i = 0; i < s.certificate->support.size(); ++i)
        os << "    lambda[" << s.certificate->support[i] << "] = " << fmt(s.certificate->lambda[i]) << "\n";
      if (!s.certificate->y.empty()) os << "    y = " << fmt(s.certificate->y) << "\n";
      os << "    residual " << fmt(s.certificate->residual) << "\n";
    }
    if (!s.separator.empty()) os << "    separator " << fmt(s.separator) << "\n";
    if (!s.note.empty()) os << "    " << s.note << "\n";
  }
  return os.str();
}

}  // namespace sipcq
