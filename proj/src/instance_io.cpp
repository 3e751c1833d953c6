#include "sipcq/instance_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace sipcq {

InstanceError::InstanceError(const std::string& message, int line)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t p = s.find(sep, start);
    out.push_back(trim(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start)));
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return out;
}

std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream is{std::string(s)};
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

double to_real(const std::string& s, int line) {
  std::string t = s;
  double v = 0.0;
  const char* first = t.data();
  const char* last = first + t.size();
  if (!t.empty() && t[0] == '+') ++first;
  auto [p, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || p != last) {
    if (t == "inf" || t == "+inf") return kInf;
    if (t == "-inf") return -kInf;
    throw InstanceError("expected a number, got '" + s + "'", line);
  }
  return v;
}

long long to_integer(const std::string& s, int line) {
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    // Accept integral reals such as 1e4.
    const double d = to_real(s, line);
    if (d != std::floor(d) || std::fabs(d) > 9e15) throw InstanceError("expected an integer, got '" + s + "'", line);
    return static_cast<long long>(d);
  }
  return v;
}

bool to_bool(const std::string& s, int line) {
  if (s == "true" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "no" || s == "0") return false;
  throw InstanceError("expected true or false, got '" + s + "'", line);
}

struct Entry {
  std::string key;
  std::string value;
  int line = 0;
};

struct Section {
  std::string kind;  // problem, index, constraints, equalities, solver
  std::string name;  // index variable name
  int line = 0;
  std::vector<Entry> entries;
};

std::vector<Section> split_sections(std::string_view text) {
  std::vector<Section> sections;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    std::size_t hash = raw.find('#');
    std::string line = trim(raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw InstanceError("unterminated section header", line_no);
      auto parts = words(std::string_view(line).substr(1, line.size() - 2));
      if (parts.empty()) throw InstanceError("empty section header", line_no);
      Section s;
      s.kind = parts[0];
      s.line = line_no;
      if (s.kind == "index") {
        if (parts.size() != 2) throw InstanceError("index section needs exactly one name", line_no);
        s.name = parts[1];
      } else if (parts.size() != 1 ||
                 (s.kind != "problem" && s.kind != "constraints" && s.kind != "equalities" && s.kind != "solver")) {
        throw InstanceError("unknown section '" + line + "'", line_no);
      }
      sections.push_back(std::move(s));
      continue;
    }
    if (sections.empty()) throw InstanceError("entry outside of a section", line_no);
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw InstanceError("expected 'key = value'", line_no);
    Entry e{trim(std::string_view(line).substr(0, eq)), trim(std::string_view(line).substr(eq + 1)), line_no};
    if (e.key.empty()) throw InstanceError("missing key", line_no);
    sections.back().entries.push_back(std::move(e));
  }
  return sections;
}

Expr parse_at(const std::string& src, const SymbolTable& symbols, int line) {
  try {
    return parse(src, symbols);
  } catch (const ParseError& e) {
    throw InstanceError(std::string("expression: ") + e.what(), line);
  }
}

IndexSetDescriptor parse_index(const Section& s, int n) {
  IndexSetDescriptor d;
  d.name = s.name;
  std::map<std::string, const Entry*> kv;
  std::vector<const Entry*> rays;
  for (const auto& e : s.entries) {
    if (e.key == "limit_ray") {
      rays.push_back(&e);
      continue;
    }
    if (kv.count(e.key)) throw InstanceError("duplicate key '" + e.key + "'", e.line);
    kv[e.key] = &e;
  }
  auto take = [&](const char* key) -> const Entry* {
    auto it = kv.find(key);
    if (it == kv.end()) return nullptr;
    const Entry* e = it->second;
    kv.erase(it);
    return e;
  };
  const Entry* kind = take("kind");
  if (!kind) throw InstanceError("index section '" + s.name + "' has no kind", s.line);
  if (kind->value == "finite") {
    FiniteIndex f;
    const Entry* v = take("values");
    if (!v) throw InstanceError("finite index set needs values", s.line);
    for (const auto& w : words(v->value)) f.values.push_back(to_real(w, v->line));
    d.kind = f;
  } else if (kind->value == "interval") {
    IntervalIndex iv;
    const Entry* lo = take("lower");
    const Entry* hi = take("upper");
    if (!lo || !hi) throw InstanceError("interval index set needs lower and upper", s.line);
    iv.lower = to_real(lo->value, lo->line);
    iv.upper = to_real(hi->value, hi->line);
    if (const Entry* e = take("include_lower")) iv.include_lower = to_bool(e->value, e->line);
    if (const Entry* e = take("include_upper")) iv.include_upper = to_bool(e->value, e->line);
    if (const Entry* e = take("resolution")) iv.resolution = static_cast<int>(to_integer(e->value, e->line));
    if (const Entry* e = take("refinement")) iv.refinement = static_cast<int>(to_integer(e->value, e->line));
    d.kind = iv;
  } else if (kind->value == "countable") {
    CountableIndex c;
    if (const Entry* e = take("start")) c.start = to_integer(e->value, e->line);
    if (const Entry* e = take("truncation")) c.truncation = to_integer(e->value, e->line);
    for (const Entry* e : rays) {
      for (const auto& group : split(e->value, ';')) {
        Vec r;
        for (const auto& w : words(group)) r.push_back(to_real(w, e->line));
        if (static_cast<int>(r.size()) != n) throw InstanceError("limit_ray needs " + std::to_string(n) + " entries", e->line);
        c.limit_rays.push_back(std::move(r));
      }
    }
    rays.clear();
    d.kind = c;
  } else {
    throw InstanceError("unknown index kind '" + kind->value + "'", kind->line);
  }
  if (!rays.empty()) throw InstanceError("limit_ray is only valid for countable index sets", rays.front()->line);
  if (!kv.empty()) throw InstanceError("unknown key '" + kv.begin()->first + "'", kv.begin()->second->line);
  return d;
}

}  // namespace

SipInstance parse_instance(std::string_view text) {
  auto sections = split_sections(text);
  SipInstance inst;
  const Section* problem = nullptr;
  for (const auto& s : sections) {
    if (s.kind != "problem") continue;
    if (problem) throw InstanceError("duplicate [problem] section", s.line);
    problem = &s;
  }
  if (!problem) throw InstanceError("missing [problem] section", 0);

  const Entry* cost_entry = nullptr;
  bool cost_max = false;
  for (const auto& e : problem->entries) {
    if (e.key == "vars") {
      inst.variables = words(e.value);
      for (const auto& v : inst.variables) {
        if (v.empty() || !(std::isalpha(static_cast<unsigned char>(v[0])) || v[0] == '_')) {
          throw InstanceError("invalid variable name '" + v + "'", e.line);
        }
      }
      inst.n = static_cast<int>(inst.variables.size());
    } else if (e.key == "minimize" || e.key == "minimize_max") {
      if (cost_entry) throw InstanceError("cost given twice", e.line);
      cost_entry = &e;
      cost_max = e.key == "minimize_max";
    } else if (e.key == "convex") {
      inst.convex = to_bool(e.value, e.line);
    } else if (e.key == "box") {
      for (const auto& range : split(e.value, ';')) {
        auto w = words(range);
        if (w.size() != 2) throw InstanceError("box ranges are 'lower upper'", e.line);
        inst.box.emplace_back(to_real(w[0], e.line), to_real(w[1], e.line));
      }
    } else {
      throw InstanceError("unknown key '" + e.key + "'", e.line);
    }
  }
  if (inst.n == 0) throw InstanceError("missing vars", problem->line);
  if (inst.n > kMaxDimension) {
    throw InstanceError("at most " + std::to_string(kMaxDimension) + " variables are supported", problem->line);
  }
  if (!cost_entry) throw InstanceError("missing minimize", problem->line);
  const SymbolTable symbols = inst.symbols();
  if (cost_max) {
    inst.cost.kind = Cost::Kind::ConvexMax;
    for (const auto& piece : split(cost_entry->value, ';')) {
      inst.cost.pieces.push_back(parse_at(piece, symbols, cost_entry->line));
    }
  } else {
    inst.cost.pieces.push_back(parse_at(cost_entry->value, symbols, cost_entry->line));
  }

  std::map<std::string, int> index_ids;
  for (const auto& s : sections) {
    if (s.kind != "index") continue;
    if (index_ids.count(s.name)) throw InstanceError("duplicate index set '" + s.name + "'", s.line);
    for (const auto& v : inst.variables) {
      if (v == s.name) throw InstanceError("index name clashes with a variable", s.line);
    }
    index_ids[s.name] = static_cast<int>(inst.index_sets.size());
    inst.index_sets.push_back(parse_index(s, inst.n));
  }

  std::map<std::string, bool> seen;
  for (const auto& s : sections) {
    if (s.kind == "constraints") {
      for (const auto& e : s.entries) {
        Constraint c;
        std::string key = e.key;
        std::size_t open = key.find('(');
        SymbolTable table = symbols;
        if (open != std::string::npos) {
          if (key.back() != ')') throw InstanceError("malformed family name '" + key + "'", e.line);
          const std::string idx = trim(std::string_view(key).substr(open + 1, key.size() - open - 2));
          c.name = trim(std::string_view(key).substr(0, open));
          auto it = index_ids.find(idx);
          if (it == index_ids.end()) throw InstanceError("unknown index set '" + idx + "'", e.line);
          c.index_set = it->second;
          table.indices = {idx};
        } else {
          c.name = key;
        }
        if (seen[c.name]) throw InstanceError("duplicate constraint name '" + c.name + "'", e.line);
        seen[c.name] = true;
        c.body = parse_at(e.value, table, e.line);
        inst.constraints.push_back(std::move(c));
      }
    } else if (s.kind == "equalities") {
      for (const auto& e : s.entries) {
        if (e.key == "affine") {
          inst.equalities.affine = to_bool(e.value, e.line);
          continue;
        }
        inst.equalities.names.push_back(e.key);
        inst.equalities.components.push_back(parse_at(e.value, symbols, e.line));
      }
    } else if (s.kind == "solver") {
      for (const auto& e : s.entries) inst.solver_options[e.key] = e.value;
    }
  }
  if (inst.equalities.affine) {
    for (const auto& h : inst.equalities.components) {
      if (!is_affine_in_x(h)) throw InstanceError("equalities declared affine but a component is not affine", 0);
    }
  }
  try {
    inst.validate();
  } catch (const std::invalid_argument& e) {
    throw InstanceError(e.what(), 0);
  }
  return inst;
}

SipInstance load_instance(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw InstanceError("cannot open " + file.string(), 0);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_instance(ss.str());
}

std::string instance_digest(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void set_truncation(SipInstance& inst, long long truncation) {
  for (auto& d : inst.index_sets) {
    if (auto* c = std::get_if<CountableIndex>(&d.kind)) c->truncation = truncation;
  }
  inst.validate();
}

}  // namespace sipcq
