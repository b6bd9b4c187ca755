// Acceptance suite: reproduces the worked examples and the randomized
// property suites end to end, one PASS/FAIL line per criterion.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

#include "flatcheck/simplify.hpp"
#include "test_helpers.hpp"

using namespace flatcheck;
using namespace flatcheck::testing;

namespace {

int g_failures = 0;

struct Criterion {
  std::string name;
  std::ostringstream log;
  bool ok = true;
  double seconds = 0;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      log << "    failed: " << what << "\n";
    }
  }
};

void run(const std::string& name, const std::function<void(Criterion&)>& body) {
  Criterion c;
  c.name = name;
  auto start = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.ok = false;
    c.log << "    exception: " << e.what() << "\n";
  }
  c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("%s %s (%.2fs)\n", c.ok ? "PASS" : "FAIL", name.c_str(), c.seconds);
  if (!c.ok) {
    std::cout << c.log.str();
    ++g_failures;
  }
}

const SamplingConfig kCfg = [] {
  SamplingConfig cfg;
  cfg.seed = 20240817;
  cfg.samples = 25;
  cfg.tau_zero = 1e-9;
  return cfg;
}();

std::vector<const BranchTrace*> accepted_branches(const DecisionTrace& t) {
  std::vector<const BranchTrace*> out;
  for (const BranchTrace& b : t.branches)
    if (b.accepted) out.push_back(&b);
  return out;
}

/// Do the candidate's component differentials span exactly the target pair?
bool outputs_span_match(const SystemModel& m, const FlatOutputCandidate& cand,
                        const std::string& t1, const std::string& t2) {
  if (cand.components.size() != 2) return false;
  Codistribution target;
  target.label = "target";
  target.generators = {
      differential(m, resolve_constants(parse_expression(t1), m.constants)),
      differential(m, resolve_constants(parse_expression(t2), m.constants))};
  if (generic_rank(m, target, kCfg) != 2) return false;
  std::vector<OneForm> dphis;
  for (const FlatOutputComponent& c : cand.components) {
    if (!c.closed_form) return false;
    dphis.push_back(differential(m, *c.closed_form));
    if (!contains_form(m, target, dphis.back(), kCfg)) return false;
  }
  Codistribution mine;
  mine.label = "candidate";
  mine.generators = dphis;
  return generic_rank(m, mine, kCfg) == 2;
}

std::vector<FlatOutputCandidate> extract_all(const SystemModel& m,
                                             const ClassifyOutcome& outcome) {
  std::vector<FlatOutputCandidate> out;
  const DecisionTrace* trace = outcome.accepted_trace();
  if (!trace) return out;
  for (const BranchTrace* b : accepted_branches(*trace))
    out.push_back(extract_flat_output(m, *trace, *b, kCfg));
  return out;
}

std::vector<VectorField> completion_pair(const SystemModel& m, const Distribution& lo,
                                         const Distribution& hi) {
  std::vector<VectorField> pair;
  Distribution acc = lo;
  acc.label = "acc";
  acc.rank_cache.reset();
  acc.involutive_cache.reset();
  for (const VectorField& g : hi.generators) {
    if (pair.size() == 2) break;
    if (!contains(m, acc, g, kCfg)) {
      pair.push_back(g);
      acc = with_field(acc, g, "acc");
    }
  }
  return pair;
}

// ---------------------------------------------------------------- criteria

void criterion1_vtol(Criterion& c) {
  SystemModel m = corpus("vtol");
  ClassifyOutcome outcome = classify(m, 2, kCfg);
  c.require(outcome.d == 2, "verdict is d=2");
  const DecisionTrace& t = *outcome.d2;
  auto acc = accepted_branches(t);
  c.require(acc.size() == 1, "exactly one branch accepted");
  if (!acc.empty())
    c.require(acc[0]->item_path == std::vector<std::string>{"1", "2b", "3a", "5"},
              "item path 1, 2b, 3a, 5");

  // solve_alg_within returns exactly {(1,0),(0,1)}
  BracketSequence seq = build_bracket_sequence(m, kCfg);
  std::vector<VectorField> pair = completion_pair(m, seq.D[0], seq.D[1]);
  c.require(pair.size() == 2, "completion pair found");
  auto sols = solve_alg_within(m, seq.D[0], pair[0], pair[1], seq.D[2], kCfg, nullptr);
  c.require(sols.size() == 2, "two algWithin solutions");
  if (sols.size() == 2) {
    c.require(Expr::equal(sols[0].alpha1, Expr::integer(1)) &&
                  Expr::equal(sols[0].alpha2, Expr::integer(0)),
              "first solution is (1, 0)");
    c.require(Expr::equal(sols[1].alpha1, Expr::integer(0)) &&
                  Expr::equal(sols[1].alpha2, Expr::integer(1)),
              "second solution is (0, 1)");
  }

  // branch E_2,1 rejected with the +2 growth reason
  bool dead_ok = false;
  for (const BranchTrace& b : t.branches)
    if (!b.accepted && b.reject_item == "3a.II" && b.reject_reason.find("+ 2") != std::string::npos)
      dead_ok = true;
  c.require(dead_ok, "branch E_2,1 rejected at 3a.II with +2 growth");
  c.require(t.find("E_2,1") != nullptr, "E_2,1 recorded");

  // flat output spans
  std::vector<FlatOutputCandidate> cands = extract_all(m, outcome);
  c.require(cands.size() == 1, "one candidate extracted");
  if (!cands.empty()) {
    c.require(outputs_span_match(m, cands[0], "x - eps*sin(theta)", "z + eps*cos(theta)"),
              "closed forms span-equivalent to (x - eps*sin(theta), z + eps*cos(theta))");
    Codistribution expected_forms;
    expected_forms.label = "expected";
    expected_forms.generators = {form(m, {{"x", "1"}, {"theta", "-eps*cos(theta)"}}),
                        form(m, {{"z", "1"}, {"theta", "-eps*sin(theta)"}})};
    for (const OneForm& w : cands[0].top_annihilator.generators)
      c.require(contains_form(m, expected_forms, w, kCfg), "annihilator matches the worked forms");
    c.require(verify_flat_output(m, cands[0], kCfg).accepted, "candidate verifies");
  }
}

void criterion2_sinratio(Criterion& c) {
  SystemModel m = corpus("sinratio");
  ClassifyOutcome outcome = classify(m, 2, kCfg);
  c.require(outcome.d == 2, "verdict is d=2");
  auto acc = accepted_branches(*outcome.d2);
  c.require(acc.size() == 1, "one accepted branch");
  if (!acc.empty()) {
    c.require(acc[0]->item_path == std::vector<std::string>{"1", "2b", "3a", "5"},
              "item path 1, 2b, 3a, 5");
    // surviving v_c = u1 d_u1 + u2 d_u2
    c.require(acc[0]->solution.has_value(), "branch carries its direction");
    if (acc[0]->solution) {
      VectorField expected = field(m, {{"u1", "u1"}, {"u2", "u2"}});
      c.require(collinear(m, acc[0]->solution->vc, expected, kCfg),
                "surviving v_c is u1 d_u1 + u2 d_u2");
    }
  }

  BracketSequence seq = build_bracket_sequence(m, kCfg);
  Distribution empty;
  empty.label = "D_-1";
  std::vector<VectorField> pair = completion_pair(m, empty, seq.D[0]);
  auto sols = solve_alg_within(m, empty, pair[0], pair[1], seq.D[1], kCfg, nullptr);
  c.require(sols.size() == 2, "two algWithin solutions");
  bool has_ratio = false;
  for (const AlgWithinSolution& s : sols)
    if (proportional_pair(m, s.alpha1, s.alpha2, parse_expression("u1"), parse_expression("u2")))
      has_ratio = true;
  c.require(has_ratio, "solutions include (u1, u2)");

  std::vector<FlatOutputCandidate> cands = extract_all(m, outcome);
  c.require(cands.size() == 1, "one candidate extracted");
  if (!cands.empty())
    c.require(outputs_span_match(m, cands[0], "x3", "x1 - x2*u1/u2"),
              "flat output (x3, x1 - x2*u1/u2) recovered up to span");
}

void criterion3_product(Criterion& c) {
  SystemModel m = corpus("product");
  ClassifyOutcome outcome = classify(m, 2, kCfg);
  c.require(outcome.d == 2, "verdict is d=2");
  auto acc = accepted_branches(*outcome.d2);
  c.require(acc.size() == 2, "two surviving branches");
  std::vector<FlatOutputCandidate> cands = extract_all(m, outcome);
  c.require(cands.size() == 2, "two candidates extracted");
  if (cands.size() == 2) {
    bool first = outputs_span_match(m, cands[0], "x2", "x3 - x1*u2") ||
                 outputs_span_match(m, cands[1], "x2", "x3 - x1*u2");
    bool second = outputs_span_match(m, cands[0], "x1", "x3 - x2*u1") ||
                  outputs_span_match(m, cands[1], "x1", "x3 - x2*u1");
    c.require(first, "one branch yields (x2, x3 - x1*u2) up to span");
    c.require(second, "the other branch yields (x1, x3 - x2*u1) up to span");
  }
}

void criterion4_sqrt(Criterion& c) {
  SystemModel m = corpus("sqrtproduct");
  ClassifyOutcome outcome = classify(m, 2, kCfg);
  c.require(!outcome.d.has_value(), "no difference d <= 2");
  c.require(outcome.verdict == "flat only with d >= 3, or not flat", "verdict wording");
  c.require(outcome.d1.has_value() && !outcome.d1->accepted, "d=1 stage ran and rejected");
  if (outcome.d1) {
    const BranchTrace& b = outcome.d1->branches[0];
    c.require(b.reject_item == "2b" && b.reject_reason.find("non-involutive") != std::string::npos,
              "d=1 rejection cites item 2b non-involutivity");
  }
  c.require(outcome.d2.has_value() && !outcome.d2->accepted, "d=2 stage ran and rejected");
  if (outcome.d2) {
    bool cited = false;
    for (const BranchTrace& b : outcome.d2->branches)
      if (b.reject_item == "3a.I" && b.reject_reason.find("+ 2") != std::string::npos) cited = true;
    c.require(cited, "d=2 rejection cites 3a.I (+2 closure growth)");
  }
}

void criterion5_academic2(Criterion& c) {
  SystemModel m = corpus("academic2");
  ClassifyOutcome outcome = classify(m, 2, kCfg);
  c.require(outcome.d == 2, "verdict is d=2");
  auto acc = accepted_branches(*outcome.d2);
  c.require(acc.size() == 1, "one accepted branch");
  if (!acc.empty())
    c.require(acc[0]->item_path == std::vector<std::string>{"1", "2b", "3b", "4b", "5"},
              "item path 1, 2b, 3b, 4b, 5");

  BracketSequence seq = build_bracket_sequence(m, kCfg);
  Distribution empty;
  empty.label = "D_-1";
  std::vector<VectorField> pair = completion_pair(m, empty, seq.D[0]);
  auto sols = solve_alg_within(m, empty, pair[0], pair[1], seq.D[1], kCfg, nullptr);
  c.require(sols.size() == 1, "unique algWithin solution");
  if (sols.size() == 1)
    c.require(Expr::equal(sols[0].alpha1, Expr::integer(1)) &&
                  Expr::equal(sols[0].alpha2, Expr::integer(-1)),
              "solution is (1, -1)");

  const Distribution* f2 = outcome.d2->find("F_2");
  c.require(f2 != nullptr, "F_2 recorded");
  if (f2) {
    Distribution expected = span_of(
        m, {coordinate_field(m, m.coordinate_index("u1")),
            coordinate_field(m, m.coordinate_index("u2")),
            field(m, {{"x1", "1"}, {"x2", "-1"}}), field(m, {{"x3", "1"}, {"x4", "-1"}})});
    c.require(same_span(m, *f2, expected, kCfg),
              "F_2 = span{d_u1, d_u2, d_x1 - d_x2, d_x3 - d_x4}");
  }

  std::vector<FlatOutputCandidate> cands = extract_all(m, outcome);
  c.require(cands.size() == 1 &&
                outputs_span_match(m, cands[0], "x1 + x2", "x3 + x4"),
            "flat output (x1+x2, x3+x4)");
}

void criterion6_coin(Criterion& c) {
  SystemModel m = corpus("coin");
  ClassifyOutcome outcome = classify(m, 2, kCfg);
  c.require(outcome.d == 2, "verdict is d=2");
  auto acc = accepted_branches(*outcome.d2);
  c.require(acc.size() == 1, "one accepted branch");
  if (!acc.empty())
    c.require(acc[0]->item_path == std::vector<std::string>{"1", "2aB", "4a.II", "5"},
              "item path 1, 2aB, 4a.II, 5");

  const Distribution* cc = outcome.d2->find("C(D_1^(1))");
  c.require(cc != nullptr, "C(D_1^(1)) recorded");
  if (cc) {
    Distribution expected = span_of(
        m, {coordinate_field(m, m.coordinate_index("u1")),
            coordinate_field(m, m.coordinate_index("u2")),
            field(m, {{"x", "R*cos(theta)"}, {"y", "R*sin(theta)"}, {"phi", "1"}})});
    c.require(same_span(m, *cc, expected, kCfg), "C(D_1^(1)) matches the three-generator span");
  }

  std::vector<FlatOutputCandidate> cands = extract_all(m, outcome);
  c.require(cands.size() == 1, "one candidate extracted");
  if (!cands.empty()) {
    c.require(cands[0].psi_used.has_value() &&
                  Expr::equal(*cands[0].psi_used, Expr::variable("theta")),
              "psi = theta used for the splice construction");
    c.require(outputs_span_match(m, cands[0], "theta", "R*phi - x*cos(theta) - y*sin(theta)"),
              "flat output (theta, R*phi - x*cos(theta) - y*sin(theta))");
  }
}

void criterion7_relative_degrees(Criterion& c) {
  for (const std::string& name : corpus_names()) {
    SystemModel m = corpus(name);
    ClassifyOutcome outcome = classify(m, 2, kCfg);
    if (!outcome.d) continue;
    for (const FlatOutputCandidate& cand : extract_all(m, outcome)) {
      if (cand.components.size() != 2 || !cand.components[0].closed_form ||
          !cand.components[1].closed_form)
        continue;
      RelativeDegreeReport rep = relative_degrees(m, *cand.components[0].closed_form,
                                                  *cand.components[1].closed_form, kCfg);
      c.require(rep.d == *outcome.d,
                name + ": relative-degree difference " + std::to_string(rep.d) +
                    " equals the verdict " + std::to_string(*outcome.d));
      c.require(rep.r1 == m.n() - rep.k2 && rep.r2 == m.n() - rep.k1,
                name + ": r1 = n - k2 and r2 = n - k1");
    }
  }
}

void criterion8_oracle(Criterion& c) {
  // ratio system: ubar1 derived from the surviving direction, two-fold
  {
    auto start = std::chrono::steady_clock::now();
    SystemModel m = corpus("sinratio");
    ClassifyOutcome outcome = classify(m, 2, kCfg);
    auto acc = accepted_branches(*outcome.d2);
    c.require(!acc.empty() && acc[0]->solution.has_value(), "ratio branch has a direction");
    if (!acc.empty() && acc[0]->solution) {
      Expr ubar = derive_prolongation_input(m, acc[0]->solution->vc, kCfg);
      OracleResult res = prolongation_oracle(m, ubar, 2, kCfg);
      c.require(res.sfl, "two-fold prolonged ratio system is static feedback linearizable");
    }
    double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    c.require(secs < 30.0, "ratio oracle under 30 s");
  }
  // arcsin example
  {
    auto start = std::chrono::steady_clock::now();
    SystemModel m = corpus("academic2");
    ClassifyOutcome outcome = classify(m, 2, kCfg);
    auto acc = accepted_branches(*outcome.d2);
    c.require(!acc.empty() && acc[0]->solution.has_value(), "arcsin branch has a direction");
    if (!acc.empty() && acc[0]->solution) {
      Expr ubar = derive_prolongation_input(m, acc[0]->solution->vc, kCfg);
      OracleResult res = prolongation_oracle(m, ubar, 2, kCfg);
      c.require(res.sfl, "two-fold prolonged arcsin system is static feedback linearizable");
    }
    double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    c.require(secs < 30.0, "arcsin oracle under 30 s");
  }
  // integrator chain stays linearizable under a one-fold prolongation
  {
    auto start = std::chrono::steady_clock::now();
    SystemModel m = corpus("chain3");
    OracleResult res = prolongation_oracle(m, Expr::variable("u1"), 1, kCfg);
    c.require(res.sfl, "one-fold prolonged chain is static feedback linearizable");
    double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    c.require(secs < 30.0, "chain oracle under 30 s");
  }
}

// ------------------------------------------------------- property suites

bool field_zero_on(const SystemModel& m, const VectorField& v) {
  for (const Expr& e : v.comps)
    if (!e.is_zero_literal() && !is_zero(e, m.sample_space(), kCfg)) return false;
  return true;
}

void criterion9a_antisymmetry(Criterion& c) {
  Rng rng(101);
  int failures = 0;
  for (int trial = 0; trial < 200; ++trial) {
    SystemModel m = random_system(3 + static_cast<int>(rng.int_in(0, 2)), rng);
    VectorField a = random_field(m, rng);
    VectorField b = random_field(m, rng);
    VectorField ab = lie_bracket(m, a, b);
    VectorField ba = lie_bracket(m, b, a);
    VectorField s;
    for (int i = 0; i < m.dim(); ++i) s.comps.push_back(simplify(ab.comps[i] + ba.comps[i]));
    if (!field_zero_on(m, s)) ++failures;
  }
  c.require(failures == 0, "antisymmetry failures: " + std::to_string(failures));
}

void criterion9b_jacobi(Criterion& c) {
  Rng rng(103);
  int failures = 0;
  for (int trial = 0; trial < 200; ++trial) {
    SystemModel m = random_system(3 + static_cast<int>(rng.int_in(0, 2)), rng);
    VectorField a = random_field(m, rng);
    VectorField b = random_field(m, rng);
    VectorField d = random_field(m, rng);
    VectorField t1 = lie_bracket(m, a, lie_bracket(m, b, d));
    VectorField t2 = lie_bracket(m, b, lie_bracket(m, d, a));
    VectorField t3 = lie_bracket(m, d, lie_bracket(m, a, b));
    VectorField s;
    for (int i = 0; i < m.dim(); ++i)
      s.comps.push_back(simplify(t1.comps[i] + t2.comps[i] + t3.comps[i]));
    if (!field_zero_on(m, s)) ++failures;
  }
  c.require(failures == 0, "Jacobi failures: " + std::to_string(failures));
}

void criterion9c_closure(Criterion& c) {
  Rng rng(107);
  int failures = 0, cases = 0;
  while (cases < 200) {
    SystemModel m = random_system(3 + static_cast<int>(rng.int_in(0, 1)), rng);
    Distribution d = span_of(m, {random_field(m, rng), random_field(m, rng)});
    try {
      if (generic_rank(m, d, kCfg) == 0) continue;
      Distribution closure = involutive_closure(m, d, kCfg, "closure");
      if (!is_involutive(m, closure, kCfg)) ++failures;
      Distribution twice = involutive_closure(m, closure, kCfg, "closure2");
      if (generic_rank(m, twice, kCfg) != generic_rank(m, closure, kCfg)) ++failures;
      ++cases;
    } catch (const DegeneracyError&) {
    } catch (const SamplingError&) {
    }
  }
  c.require(failures == 0, "closure failures: " + std::to_string(failures));
}

void criterion9d_cauchy(Criterion& c) {
  Rng rng(109);
  int failures = 0, cases = 0;
  while (cases < 200) {
    SystemModel m = random_system(3 + static_cast<int>(rng.int_in(0, 1)), rng);
    Distribution d = span_of(
        m, {random_field(m, rng), random_field(m, rng), coordinate_field(m, m.n())});
    try {
      int rank = generic_rank(m, d, kCfg);
      if (rank < 2 || rank == m.dim()) continue;
      Distribution cc = cauchy_characteristic(m, d, kCfg, "C(D)");
      std::vector<VectorField> gens = reduced_generators(m, d, kCfg);
      for (const VectorField& ch : cc.generators) {
        if (!contains(m, d, ch, kCfg)) ++failures;
        for (const VectorField& g : gens)
          if (!contains(m, d, lie_bracket(m, ch, g), kCfg)) ++failures;
      }
      if (!is_involutive(m, d, kCfg) &&
          static_cast<int>(cc.generators.size()) > rank - 2)
        ++failures;
      ++cases;
    } catch (const DegeneracyError&) {
    } catch (const SamplingError&) {
    }
  }
  c.require(failures == 0, "Cauchy failures: " + std::to_string(failures));
}

void criterion9e_annihilator(Criterion& c) {
  Rng rng(113);
  int failures = 0, cases = 0;
  while (cases < 200) {
    SystemModel m = random_system(3 + static_cast<int>(rng.int_in(0, 2)), rng);
    Distribution d = span_of(m, {random_field(m, rng), random_field(m, rng)});
    try {
      int rank = generic_rank(m, d, kCfg);
      if (rank == 0) continue;
      Codistribution ann = annihilator(m, d, kCfg, "ann");
      if (generic_rank(m, ann, kCfg) + rank != m.dim()) ++failures;
      for (const OneForm& w : ann.generators)
        for (const VectorField& g : d.generators)
          if (!is_zero(pairing(w, g), m.sample_space(), kCfg)) ++failures;
      ++cases;
    } catch (const DegeneracyError&) {
    } catch (const SamplingError&) {
    }
  }
  c.require(failures == 0, "annihilator failures: " + std::to_string(failures));
}

void criterion9f_input_invariance(Criterion& c) {
  Rng rng(127);
  const std::vector<std::string> systems = {"vtol",      "sinratio", "product",
                                            "sqrtproduct", "academic2", "coin"};
  for (const std::string& name : systems) {
    SystemModel base = corpus(name);
    ClassifyOutcome ref = classify(base, 2, kCfg);
    BracketSequence ref_seq = build_bracket_sequence(base, kCfg);
    auto ref_acc = ref.accepted_trace();
    std::vector<std::pair<std::optional<int>, std::optional<int>>> ref_ks;
    if (ref_acc)
      for (const BranchTrace* b : accepted_branches(*ref_acc)) ref_ks.push_back({b->k2, b->s});
    std::sort(ref_ks.begin(), ref_ks.end());

    for (int trial = 0; trial < 5; ++trial) {
      // regular affine input transformation u = M^-1 (ubar - psi(x))
      Rat a(rng.int_in(1, 2)), b2(rng.int_in(-1, 1)), cc(rng.int_in(-1, 1)), d(rng.int_in(1, 2));
      Rat det = a * d - b2 * cc;
      if (det.is_zero()) {
        b2 = Rat(0);
        cc = Rat(0);
        det = a * d;
      }
      Expr shift1 = Expr::rational(Rat(rng.int_in(-1, 1), 2)) * Expr::variable(base.states[0]);
      Expr shift2 = Expr::rational(Rat(rng.int_in(-1, 1), 2)) * Expr::variable(base.states[1 % base.n()]);
      Expr ub1 = Expr::variable(base.inputs[0]);
      Expr ub2 = Expr::variable(base.inputs[1]);
      Expr e1 = simplify(Expr::rational(d / det) * (ub1 - shift1) -
                         Expr::rational(b2 / det) * (ub2 - shift2));
      Expr e2 = simplify(Expr::rational(a / det) * (ub2 - shift2) -
                         Expr::rational(cc / det) * (ub1 - shift1));
      std::map<std::string, Expr> bind = {{base.inputs[0], e1}, {base.inputs[1], e2}};
      SystemModel mixed = base;
      mixed.name = base.name + "-mix" + std::to_string(trial);
      for (Expr& rhs : mixed.dynamics) rhs = simplify(substitute(rhs, bind));
      for (Assumption& asum : mixed.assumptions) asum.expr = simplify(substitute(asum.expr, bind));
      try {
        mixed.validate(kCfg);
        ClassifyOutcome alt = classify(mixed, 2, kCfg);
        c.require(alt.verdict == ref.verdict, name + ": verdict invariant under input mixing");
        c.require(alt.d == ref.d, name + ": difference invariant");
        BracketSequence alt_seq = build_bracket_sequence(mixed, kCfg);
        c.require(alt_seq.dims == ref_seq.dims, name + ": D-ladder ranks invariant");
        c.require(alt_seq.k1 == ref_seq.k1, name + ": k1 invariant");
        auto alt_acc = alt.accepted_trace();
        std::vector<std::pair<std::optional<int>, std::optional<int>>> alt_ks;
        if (alt_acc)
          for (const BranchTrace* b : accepted_branches(*alt_acc)) alt_ks.push_back({b->k2, b->s});
        std::sort(alt_ks.begin(), alt_ks.end());
        c.require(alt_ks == ref_ks, name + ": (k2, s) of accepted branches invariant");
      } catch (const SamplingError& e) {
        c.require(false, name + ": sampling failed after mixing: " + e.what());
      }
    }
  }
}

void criterion9g_algwithin_count(Criterion& c) {
  Rng rng(131);
  int cases = 0, failures = 0, trials = 0;
  while (cases < 200 && trials < 5000) {
    ++trials;
    SystemModel m = random_system(3 + static_cast<int>(rng.int_in(0, 2)), rng);  // n <= 5
    try {
      m.validate(kCfg);
      BracketSequence seq = build_bracket_sequence(m, kCfg);
      if (!seq.k1) continue;
      int k1 = *seq.k1;
      bool dims_ok = true;
      for (int i = 1; i <= k1; ++i)
        if (seq.dims[i] != 2 * (i + 1)) dims_ok = false;
      if (!dims_ok) continue;
      Distribution lo;
      lo.label = "D_lo";
      if (k1 >= 2) lo = seq.D[k1 - 2];
      std::vector<VectorField> pair = completion_pair(m, lo, seq.D[k1 - 1]);
      if (pair.size() != 2) continue;
      if (subset_of_cauchy(m, seq.D[k1 - 1], seq.D[k1], kCfg)) continue;
      auto sols = solve_alg_within(m, lo, pair[0], pair[1], seq.D[k1], kCfg, nullptr);
      if (sols.size() > 2) ++failures;
      ++cases;
    } catch (const DegeneracyError&) {
    } catch (const SamplingError&) {
    } catch (const ModelError&) {
    } catch (const InternalError&) {
    }
  }
  c.require(cases >= 200, "reached 200 solver cases (got " + std::to_string(cases) + ")");
  c.require(failures == 0, "solution-count failures: " + std::to_string(failures));
}

}  // namespace

int main() {
  run("criterion 1: VTOL decision, branches, flat output (< 10 s)", [](Criterion& c) {
    criterion1_vtol(c);
    // re-run timing against the budget
  });
  // runtime budgets re-checked explicitly
  {
    auto start = std::chrono::steady_clock::now();
    SystemModel m = corpus("vtol");
    ClassifyOutcome outcome = classify(m, 2, kCfg);
    extract_all(m, outcome);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion 1 runtime: %.2fs < 10s\n", secs < 10.0 ? "PASS" : "FAIL", secs);
    if (secs >= 10.0) ++g_failures;
  }
  run("criterion 2: sin(u1/u2) decision and flat output (< 5 s)", criterion2_sinratio);
  {
    auto start = std::chrono::steady_clock::now();
    SystemModel m = corpus("sinratio");
    ClassifyOutcome outcome = classify(m, 2, kCfg);
    extract_all(m, outcome);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion 2 runtime: %.2fs < 5s\n", secs < 5.0 ? "PASS" : "FAIL", secs);
    if (secs >= 5.0) ++g_failures;
  }
  run("criterion 3: u1*u2 system, two branches and outputs", criterion3_product);
  run("criterion 4: sqrt(u1*u2) negative example with cited items", criterion4_sqrt);
  run("criterion 5: arcsin example, unique solution and F_2", criterion5_academic2);
  run("criterion 6: rolling coin, 2aB path and psi construction", criterion6_coin);
  run("criterion 7: relative-degree consistency across the corpus", criterion7_relative_degrees);
  run("criterion 8: prolongation oracle (< 30 s each)", criterion8_oracle);
  run("criterion 9a: bracket antisymmetry (200 cases)", criterion9a_antisymmetry);
  run("criterion 9b: Jacobi identity (200 cases)", criterion9b_jacobi);
  run("criterion 9c: closure idempotence and involutivity (200 cases)", criterion9c_closure);
  run("criterion 9d: Cauchy characteristic property (200 cases)", criterion9d_cauchy);
  run("criterion 9e: annihilator rank complement (200 cases)", criterion9e_annihilator);
  run("criterion 9f: input-transformation invariance (6 systems x 5)", criterion9f_input_invariance);
  run("criterion 9g: algWithin solution count <= 2 (200 cases)", criterion9g_algwithin_count);

  if (g_failures == 0)
    std::printf("acceptance: all criteria passed\n");
  else
    std::printf("acceptance: %d criteria FAILED\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
