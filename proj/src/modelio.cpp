#include "flatcheck/modelio.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "flatcheck/errors.hpp"
#include "flatcheck/simplify.hpp"

namespace flatcheck {

// ------------------------------------------------------ expression parser

namespace {

struct ExprParser {
  const std::string& text;
  std::size_t pos = 0;

  explicit ExprParser(const std::string& t) : text(t) {}

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }
  bool eat(char c) {
    skip_ws();
    if (pos < text.size() && text[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }
  char peek() {
    skip_ws();
    return pos < text.size() ? text[pos] : '\0';
  }
  [[noreturn]] void fail(const std::string& what) {
    throw ModelError("expression error at column " + std::to_string(pos + 1) + ": " + what +
                     " in \"" + text + "\"");
  }

  Expr parse() {
    Expr e = expr();
    skip_ws();
    if (pos != text.size()) fail("trailing input");
    return e;
  }

  Expr expr() {
    Expr acc = term();
    while (true) {
      if (eat('+'))
        acc = acc + term();
      else if (eat('-'))
        acc = acc - term();
      else
        return acc;
    }
  }

  Expr term() {
    Expr acc = unary();
    while (true) {
      if (eat('*'))
        acc = acc * unary();
      else if (eat('/'))
        acc = acc / unary();
      else
        return acc;
    }
  }

  Expr unary() {
    if (eat('-')) return Expr::neg(unary());
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (eat('^')) {
      skip_ws();
      bool negative = false;
      if (pos < text.size() && text[pos] == '-') {
        negative = true;
        ++pos;
      }
      if (pos >= text.size() || !std::isdigit(static_cast<unsigned char>(text[pos])))
        fail("integer exponent expected");
      long v = 0;
      while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos])))
        v = v * 10 + (text[pos++] - '0');
      return Expr::pow(base, static_cast<int>(negative ? -v : v));
    }
    return base;
  }

  Expr primary() {
    skip_ws();
    if (pos >= text.size()) fail("unexpected end of input");
    char c = text[pos];
    if (c == '(') {
      ++pos;
      Expr e = expr();
      if (!eat(')')) fail("missing ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail("unexpected character");
  }

  Expr number() {
    std::int64_t whole = 0;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
      whole = whole * 10 + (text[pos] - '0');
      if (whole < 0) fail("integer literal too large");
      ++pos;
    }
    if (pos < text.size() && text[pos] == '.') {
      ++pos;
      std::int64_t frac = 0, scale = 1;
      while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
        frac = frac * 10 + (text[pos] - '0');
        scale *= 10;
        if (frac < 0 || scale < 0) fail("decimal literal too precise");
        ++pos;
      }
      return Expr::rational(Rat(whole) + Rat(frac, scale));
    }
    return Expr::integer(whole);
  }

  Expr identifier() {
    std::size_t start = pos;
    while (pos < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
      ++pos;
    std::string name = text.substr(start, pos - start);
    static const std::vector<std::pair<std::string, Fn>> functions = {
        {"sin", Fn::Sin},     {"cos", Fn::Cos},   {"tan", Fn::Tan}, {"arcsin", Fn::Arcsin},
        {"asin", Fn::Arcsin}, {"sqrt", Fn::Sqrt}, {"exp", Fn::Exp}, {"log", Fn::Log}};
    skip_ws();
    if (pos < text.size() && text[pos] == '(') {
      for (const auto& [fname, fn] : functions) {
        if (name == fname) {
          ++pos;  // '('
          Expr arg = expr();
          if (!eat(')')) fail("missing ')' after function argument");
          return Expr::apply(fn, arg);
        }
      }
      fail("unknown function '" + name + "'");
    }
    return Expr::variable(name);
  }
};

}  // namespace

Expr parse_expression(const std::string& text) { return ExprParser(text).parse(); }

Expr resolve_constants(const Expr& e, const std::vector<ConstantDecl>& constants) {
  std::map<std::string, Expr> bindings;
  for (const ConstantDecl& c : constants) bindings.emplace(c.name, Expr::constant(c.name));
  return substitute(e, bindings);
}

// ------------------------------------------------------------ model parser

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

}  // namespace

SystemModel parse_model(const std::string& text) {
  SystemModel model;
  std::vector<std::pair<std::string, std::string>> raw_dynamics;  // state -> expr text
  std::vector<std::pair<std::string, int>> raw_assumptions;       // text, line

  enum class Section { Header, Dynamics, Assumptions } section = Section::Header;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::string::size_type hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line == "dynamics") {
      section = Section::Dynamics;
      continue;
    }
    if (line == "assumptions") {
      section = Section::Assumptions;
      continue;
    }

    if (section == Section::Dynamics) {
      std::string::size_type eq = line.find('=');
      if (eq == std::string::npos) throw ModelError("dynamics line needs '='", line_no);
      std::string lhs = trim(line.substr(0, eq));
      if (lhs.size() < 2 || lhs.back() != '\'')
        throw ModelError("dynamics left-hand side must be <state>'", line_no);
      raw_dynamics.emplace_back(trim(lhs.substr(0, lhs.size() - 1)), trim(line.substr(eq + 1)));
      continue;
    }
    if (section == Section::Assumptions) {
      raw_assumptions.emplace_back(line, line_no);
      continue;
    }

    std::vector<std::string> words = split_words(line);
    if (words.empty()) continue;
    const std::string& head = words[0];
    if (head == "system") {
      if (words.size() != 2) throw ModelError("system line needs a name", line_no);
      model.name = words[1];
    } else if (head == "states") {
      for (std::size_t i = 1; i < words.size(); ++i) model.states.push_back(words[i]);
    } else if (head == "inputs") {
      for (std::size_t i = 1; i < words.size(); ++i) model.inputs.push_back(words[i]);
    } else if (head == "constant") {
      std::string rest = trim(line.substr(head.size()));
      std::string::size_type eq = rest.find('=');
      ConstantDecl decl;
      if (eq == std::string::npos) {
        decl.name = trim(rest);
      } else {
        decl.name = trim(rest.substr(0, eq));
        Expr value = parse_expression(trim(rest.substr(eq + 1)));
        Expr s = simplify(value);
        if (!s.is_rational()) throw ModelError("pinned constant value must be rational", line_no);
        decl.pinned = s.value();
      }
      if (decl.name.empty()) throw ModelError("constant line needs a name", line_no);
      model.constants.push_back(std::move(decl));
    } else {
      throw ModelError("unknown directive '" + head + "'", line_no);
    }
  }

  if (model.name.empty()) throw ModelError("missing 'system <name>' line");
  if (model.states.empty()) throw ModelError("missing 'states' declaration");
  if (model.inputs.size() != 2) throw ModelError("exactly two inputs must be declared");

  model.dynamics.assign(model.states.size(), Expr::integer(0));
  std::vector<bool> defined(model.states.size(), false);
  for (const auto& [state, rhs] : raw_dynamics) {
    auto it = std::find(model.states.begin(), model.states.end(), state);
    if (it == model.states.end()) throw ModelError("dynamics for undeclared state '" + state + "'");
    std::size_t idx = static_cast<std::size_t>(it - model.states.begin());
    if (defined[idx]) throw ModelError("duplicate dynamics for state '" + state + "'");
    defined[idx] = true;
    model.dynamics[idx] = resolve_constants(parse_expression(rhs), model.constants);
  }
  for (std::size_t i = 0; i < defined.size(); ++i)
    if (!defined[i]) throw ModelError("missing dynamics for state '" + model.states[i] + "'");

  for (const auto& [atext, aline] : raw_assumptions) {
    Assumption a;
    std::string::size_type ne = atext.find("!=");
    std::string::size_type gt = atext.find('>');
    std::string lhs;
    if (ne != std::string::npos) {
      lhs = trim(atext.substr(0, ne));
      if (trim(atext.substr(ne + 2)) != "0")
        throw ModelError("assumptions must end in '!= 0'", aline);
      a.relation = Assumption::Relation::NonZero;
    } else if (gt != std::string::npos) {
      lhs = trim(atext.substr(0, gt));
      if (trim(atext.substr(gt + 1)) != "0") throw ModelError("assumptions must end in '> 0'", aline);
      a.relation = Assumption::Relation::Positive;
    } else {
      throw ModelError("assumption needs '!= 0' or '> 0'", aline);
    }
    a.expr = resolve_constants(parse_expression(lhs), model.constants);
    model.assumptions.push_back(std::move(a));
  }
  return model;
}

std::string serialize_model(const SystemModel& model) {
  std::ostringstream os;
  os << "system " << model.name << "\n";
  os << "states";
  for (const std::string& s : model.states) os << ' ' << s;
  os << "\ninputs " << model.inputs[0] << ' ' << model.inputs[1] << "\n";
  for (const ConstantDecl& c : model.constants) {
    os << "constant " << c.name;
    if (c.pinned) os << " = " << c.pinned->str();
    os << "\n";
  }
  os << "dynamics\n";
  for (std::size_t i = 0; i < model.states.size(); ++i)
    os << "  " << model.states[i] << "' = " << model.dynamics[i].str() << "\n";
  if (!model.assumptions.empty()) {
    os << "assumptions\n";
    for (const Assumption& a : model.assumptions) os << "  " << a.str() << "\n";
  }
  return os.str();
}

bool model_equal(const SystemModel& a, const SystemModel& b) {
  if (a.name != b.name || a.states != b.states || a.inputs != b.inputs) return false;
  if (a.constants.size() != b.constants.size() || a.dynamics.size() != b.dynamics.size() ||
      a.assumptions.size() != b.assumptions.size())
    return false;
  for (std::size_t i = 0; i < a.constants.size(); ++i) {
    if (a.constants[i].name != b.constants[i].name) return false;
    if (a.constants[i].pinned.has_value() != b.constants[i].pinned.has_value()) return false;
    if (a.constants[i].pinned && !(*a.constants[i].pinned == *b.constants[i].pinned)) return false;
  }
  for (std::size_t i = 0; i < a.dynamics.size(); ++i)
    if (!Expr::equal(a.dynamics[i], b.dynamics[i])) return false;
  for (std::size_t i = 0; i < a.assumptions.size(); ++i) {
    if (a.assumptions[i].relation != b.assumptions[i].relation) return false;
    if (!Expr::equal(a.assumptions[i].expr, b.assumptions[i].expr)) return false;
  }
  return true;
}

// ------------------------------------------------------------------ corpus

namespace {

struct CorpusEntry {
  const char* name;
  const char* text;
};

const CorpusEntry kCorpus[] = {
    {"vtol", R"(# planar VTOL aircraft
system vtol
states x z theta v_x v_z omega
inputs u1 u2
constant eps
dynamics
  x' = v_x
  z' = v_z
  theta' = omega
  v_x' = eps*cos(theta)*u2 - sin(theta)*u1
  v_z' = cos(theta)*u1 + eps*sin(theta)*u2 - 1
  omega' = u2
assumptions
  eps != 0
)"},
    {"sinratio", R"(# integrators driving sin(u1/u2)
system sinratio
states x1 x2 x3
inputs u1 u2
dynamics
  x1' = u1
  x2' = u2
  x3' = sin(u1/u2)
assumptions
  u2 != 0
)"},
    {"product", R"(# integrators driving the input product
system product
states x1 x2 x3
inputs u1 u2
dynamics
  x1' = u1
  x2' = u2
  x3' = u1*u2
)"},
    {"sqrtproduct", R"(# integrators driving sqrt(u1*u2); flat only with d >= 3
system sqrtproduct
states x1 x2 x3
inputs u1 u2
dynamics
  x1' = u1
  x2' = u2
  x3' = sqrt(u1*u2)
assumptions
  u1*u2 > 0
)"},
    {"academic2", R"(# arcsin coupling with two integrator inputs
system academic2
states x1 x2 x3 x4
inputs u1 u2
dynamics
  x1' = arcsin((u1+u2)/x2) - x4
  x2' = x4
  x3' = u1
  x4' = u2
assumptions
  x2^2 - (u1+u2)^2 > 0
)"},
    {"coin", R"(# coin rolling on a rotating table
system coin
states x y theta phi
inputs u1 u2
constant R
constant Omega
dynamics
  x' = Omega*cos(theta)*(x*sin(theta) - y*cos(theta)) + R*cos(theta)*u2
  y' = Omega*sin(theta)*(x*sin(theta) - y*cos(theta)) + R*sin(theta)*u2
  theta' = u1
  phi' = u2
assumptions
  R != 0
)"},
    {"chain3", R"(# two parallel integrator chains; static feedback linearizable
system chain3
states x1 x2 x3
inputs u1 u2
dynamics
  x1' = x2
  x2' = u1
  x3' = u2
)"},
    {"feedchain", R"(# integrator chain under a prolonged input mix; flat with d = 1
system feedchain
states x1 x2 x3 x4
inputs u1 u2
dynamics
  x1' = x2
  x2' = x4 - u2^2
  x3' = u2
  x4' = u1
)"},
    {"brockett", R"(# nonholonomic integrator; flat with d = 1
system brockett
states x1 x2 x3
inputs u1 u2
dynamics
  x1' = u1
  x2' = u2
  x3' = x2*u1
)"},
    {"chain4twist", R"(# nonholonomic integrator with an appended integrator; flat with d = 1
system chain4twist
states x1 x2 x3 x4
inputs u1 u2
dynamics
  x1' = u1
  x2' = u2
  x3' = x2*u1
  x4' = x3
)"},
    {"chained4", R"(# four-state chained form; flat with d = 2
system chained4
states x1 x2 x3 x4
inputs u1 u2
dynamics
  x1' = u1
  x2' = u2
  x3' = x2*u1
  x4' = x3*u1
)"},
    {"twinchain", R"(# two coupled chains with a deep cross-twist; flat with d = 2
system twinchain
states x1 x2 x3 x4 x5 x6
inputs u1 u2
dynamics
  x1' = u1
  x2' = u2
  x3' = x2*u1
  x4' = x3
  x5' = x1
  x6' = x4 + x5*x3
)"},
};

}  // namespace

std::vector<std::string> corpus_names() {
  std::vector<std::string> out;
  for (const CorpusEntry& e : kCorpus) out.push_back(e.name);
  return out;
}

std::string corpus_text(const std::string& name) {
  for (const CorpusEntry& e : kCorpus)
    if (name == e.name) return e.text;
  throw ModelError("unknown corpus model '" + name + "'");
}

SystemModel load_corpus_model(const std::string& name) { return parse_model(corpus_text(name)); }

SystemModel load_model(const std::string& path_or_name) {
  std::ifstream file(path_or_name);
  if (file.good()) {
    std::ostringstream buf;
    buf << file.rdbuf();
    return parse_model(buf.str());
  }
  for (const CorpusEntry& e : kCorpus)
    if (path_or_name == e.name) return parse_model(e.text);
  throw ModelError("cannot open model file '" + path_or_name + "' (and no such corpus model)");
}

// ------------------------------------------------------------------ reports

namespace {

Json claim_json(const Claim& c) {
  Json j;
  j["item"] = c.item;
  j["holds"] = c.holds;
  j["description"] = c.description;
  return j;
}

Json trace_json(const SystemModel& model, const DecisionTrace& trace) {
  Json j;
  j["stage"] = stage_name(trace.stage);
  j["accepted"] = trace.accepted;
  if (trace.k1) j["k1"] = *trace.k1;
  if (!trace.diagnosis.empty()) j["diagnosis"] = trace.diagnosis;
  Json shared = Json::array();
  for (const Claim& c : trace.shared_items) shared.push_back(claim_json(c));
  j["shared_claims"] = shared;
  if (!trace.alg_records.empty()) {
    Json recs = Json::array();
    for (const AlgWithinRecord& r : trace.alg_records) {
      Json rj;
      rj["alpha1"] = r.alpha1;
      rj["alpha2"] = r.alpha2;
      rj["verified"] = r.verified;
      rj["survived_filter"] = r.survived_filter;
      rj["note"] = r.note;
      recs.push_back(rj);
    }
    j["alg_within"] = recs;
  }
  Json branches = Json::array();
  for (const BranchTrace& b : trace.branches) {
    Json bj;
    bj["id"] = b.id;
    bj["accepted"] = b.accepted;
    bj["item_path"] = b.item_path;
    if (b.solution) {
      bj["alpha1"] = b.solution->alpha1.str();
      bj["alpha2"] = b.solution->alpha2.str();
      bj["v_c"] = b.solution->vc.str(model);
    }
    if (b.k2) bj["k2"] = *b.k2;
    if (b.s) bj["s"] = *b.s;
    if (!b.accepted) {
      bj["rejected_at"] = b.reject_item;
      bj["reject_reason"] = b.reject_reason;
    }
    Json claims = Json::array();
    for (const Claim& c : b.items) claims.push_back(claim_json(c));
    bj["claims"] = claims;
    branches.push_back(bj);
  }
  j["branches"] = branches;
  Json dists = Json::array();
  for (const NamedDistribution& nd : trace.table) {
    Json dj;
    dj["name"] = nd.name;
    dj["rank"] = nd.rank;
    Json gens = Json::array();
    for (const VectorField& g : nd.dist.generators) gens.push_back(g.str(model));
    dj["generators"] = gens;
    dists.push_back(dj);
  }
  j["distributions"] = dists;
  return j;
}

Json candidate_json(const SystemModel& model, const FlatOutputCandidate& cand,
                    const VerifyResult* verify, const RelativeDegreeReport* deg) {
  Json j;
  j["branch"] = cand.branch_id;
  j["recipe"] =
      cand.recipe == FlatOutputCandidate::Recipe::Codim2 ? "codim-2" : "codim-1 Lie chain";
  j["partial"] = cand.partial;
  if (!cand.extraction_note.empty()) j["extraction_note"] = cand.extraction_note;
  if (cand.psi_used) j["psi"] = cand.psi_used->str();
  Json comps = Json::array();
  for (const FlatOutputComponent& c : cand.components) {
    Json cj;
    cj["integrated"] = c.integrated;
    if (c.closed_form) cj["closed_form"] = c.closed_form->str();
    cj["one_form"] = c.form.str(model);
    comps.push_back(cj);
  }
  j["components"] = comps;
  if (verify) {
    j["verified"] = verify->accepted;
    if (!verify->accepted) j["verify_reason"] = verify->reason;
  }
  if (deg) {
    Json dj;
    dj["k1"] = deg->k1;
    dj["k2"] = deg->k2;
    dj["r1"] = deg->r1;
    dj["r2"] = deg->r2;
    dj["d"] = deg->d;
    j["relative_degrees"] = dj;
  }
  return j;
}

}  // namespace

Json build_report(const ReportInputs& in, const SamplingConfig& cfg, int dmax) {
  Json j;
  j["schema"] = "flatcheck-report/1";
  j["model"] = in.model->name;
  Json settings;
  settings["seed"] = cfg.seed;
  settings["samples"] = cfg.samples;
  settings["tau_zero"] = cfg.tau_zero;
  settings["max_d"] = dmax;
  j["settings"] = settings;
  Json pinned = Json::array();
  for (const ConstantDecl& c : in.model->constants) {
    Json cj;
    cj["name"] = c.name;
    cj["pinned"] = c.pinned.has_value();
    if (c.pinned) cj["value"] = c.pinned->str();
    pinned.push_back(cj);
  }
  j["constants"] = pinned;
  j["verdict"] = in.outcome->verdict;
  if (in.outcome->d)
    j["d"] = *in.outcome->d;
  else
    j["d"] = nullptr;
  if (!in.outcome->diagnosis.empty()) j["diagnosis"] = in.outcome->diagnosis;
  j["confidence"] = "probabilistic (identity tests by random evaluation)";
  Json stages = Json::array();
  stages.push_back(trace_json(*in.model, in.outcome->sfl));
  if (in.outcome->d1) stages.push_back(trace_json(*in.model, *in.outcome->d1));
  if (in.outcome->d2) stages.push_back(trace_json(*in.model, *in.outcome->d2));
  j["stages"] = stages;
  if (in.with_flat_outputs) {
    Json cands = Json::array();
    for (std::size_t i = 0; i < in.candidates.size(); ++i) {
      const VerifyResult* v = i < in.verifications.size() ? &in.verifications[i] : nullptr;
      const RelativeDegreeReport* deg =
          (i < in.degrees.size() && in.degrees[i]) ? &*in.degrees[i] : nullptr;
      cands.push_back(candidate_json(*in.model, in.candidates[i], v, deg));
    }
    j["flat_outputs"] = cands;
  }
  return j;
}

std::string render_text_report(const ReportInputs& in, const SamplingConfig& cfg) {
  std::ostringstream os;
  const SystemModel& model = *in.model;
  const ClassifyOutcome& outcome = *in.outcome;
  os << "model:   " << model.name << "  (" << model.n() << " states, 2 inputs)\n";
  os << "verdict: " << outcome.verdict << "\n";
  const DecisionTrace* accepted = outcome.accepted_trace();
  if (accepted) {
    const BranchTrace* branch = accepted->accepted_branch();
    if (branch && !branch->item_path.empty()) {
      os << "path:    ";
      for (std::size_t i = 0; i < branch->item_path.size(); ++i)
        os << (i ? ", " : "") << branch->item_path[i];
      os << "\n";
    }
    std::vector<std::string> indices;
    if (accepted->k1) indices.push_back("k1 = " + std::to_string(*accepted->k1));
    if (branch && branch->k2) indices.push_back("k2 = " + std::to_string(*branch->k2));
    if (branch && branch->s) indices.push_back("s = " + std::to_string(*branch->s));
    for (std::size_t i = 0; i < indices.size(); ++i) os << (i ? ", " : "") << indices[i];
    if (!indices.empty()) os << "\n";
  } else if (outcome.sfl.k1) {
    os << "k1 = " << *outcome.sfl.k1 << "\n";
  }
  os << "settings: seed=" << cfg.seed << " samples=" << cfg.samples << " tau_zero=" << cfg.tau_zero
     << "\n";

  auto print_trace = [&](const DecisionTrace& t) {
    os << "\n[" << stage_name(t.stage) << "] " << (t.accepted ? "accepted" : "rejected") << "\n";
    for (const Claim& c : t.shared_items)
      os << "  " << (c.holds ? "ok  " : "FAIL") << " [" << c.item << "] " << c.description << "\n";
    for (const AlgWithinRecord& r : t.alg_records)
      os << "  candidate (alpha1, alpha2) = (" << r.alpha1 << ", " << r.alpha2 << ")"
         << (r.verified ? (r.survived_filter ? "  [branch]" : "  [rejected by Cauchy filter]")
                        : "  [discarded]")
         << "  " << r.note << "\n";
    for (const BranchTrace& b : t.branches) {
      if (t.branches.size() > 1 || b.solution) {
        os << "  branch " << b.id;
        if (b.solution) os << "  v_c = " << b.solution->vc.str(model);
        os << (b.accepted ? "  accepted" : "  rejected") << "\n";
      }
      for (const Claim& c : b.items)
        os << "    " << (c.holds ? "ok  " : "FAIL") << " [" << c.item << "] " << c.description
           << "\n";
      if (!b.accepted && !b.reject_reason.empty())
        os << "    rejected at [" << b.reject_item << "]: " << b.reject_reason << "\n";
    }
    os << "  distributions:\n";
    for (const NamedDistribution& nd : t.table) {
      os << "    " << nd.name << " (rank " << nd.rank << ")\n";
      for (const VectorField& g : nd.dist.generators) os << "      " << g.str(model) << "\n";
    }
  };
  print_trace(outcome.sfl);
  if (outcome.d1) print_trace(*outcome.d1);
  if (outcome.d2) print_trace(*outcome.d2);

  if (in.with_flat_outputs) {
    os << "\nflat outputs:\n";
    if (in.candidates.empty()) os << "  (none extracted)\n";
    for (std::size_t i = 0; i < in.candidates.size(); ++i) {
      const FlatOutputCandidate& cand = in.candidates[i];
      os << "  branch " << cand.branch_id << " ("
         << (cand.recipe == FlatOutputCandidate::Recipe::Codim2 ? "codim-2" : "codim-1 Lie chain")
         << ")";
      if (cand.psi_used) os << "  psi = " << cand.psi_used->str();
      os << "\n";
      if (!cand.extraction_note.empty())
        os << "    not extracted: " << cand.extraction_note << "\n";
      for (const FlatOutputComponent& c : cand.components) {
        if (c.closed_form)
          os << "    phi = " << c.closed_form->str() << "\n";
        else
          os << "    one-form (not integrated): " << c.form.str(model) << "\n";
      }
      if (i < in.verifications.size()) {
        const VerifyResult& v = in.verifications[i];
        std::string line = v.accepted ? "accepted"
                          : v.reason.rfind("not attempted", 0) == 0 ? v.reason
                                                                    : "REJECTED: " + v.reason;
        os << "    verification: " << line << "\n";
      }
      if (i < in.degrees.size() && in.degrees[i])
        os << "    relative degrees: k1=" << in.degrees[i]->k1 << " k2=" << in.degrees[i]->k2
           << " r1=" << in.degrees[i]->r1 << " r2=" << in.degrees[i]->r2
           << " d=" << in.degrees[i]->d << "\n";
    }
  }
  return os.str();
}

}  // namespace flatcheck
