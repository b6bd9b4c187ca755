#include "flatcheck/decision.hpp"

#include <algorithm>
#include <sstream>

#include "flatcheck/errors.hpp"
#include "flatcheck/simplify.hpp"

namespace flatcheck {

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::SFL: return "static-feedback-linearizability";
    case Stage::D1: return "difference-1";
    case Stage::D2: return "difference-2";
  }
  return "?";
}

const Distribution* DecisionTrace::find(const std::string& name) const {
  for (const NamedDistribution& nd : table)
    if (nd.name == name) return &nd.dist;
  return nullptr;
}

void DecisionTrace::add(const SystemModel& model, const std::string& name,
                        const Distribution& dist, const SamplingConfig& cfg_) {
  NamedDistribution nd;
  nd.name = name;
  nd.dist = dist;
  nd.dist.label = name;
  nd.rank = generic_rank(model, dist, cfg_);
  table.push_back(std::move(nd));
}

const BranchTrace* DecisionTrace::accepted_branch() const {
  for (const BranchTrace& b : branches)
    if (b.accepted) return &b;
  return nullptr;
}

namespace {

std::string sub(int i) { return std::to_string(i); }

bool contained_in(const SystemModel& model, const Distribution& inner, const Distribution& outer,
                  const SamplingConfig& cfg) {
  if (inner.empty()) return true;
  int base = generic_rank(model, outer, cfg);
  Distribution ext = sum(outer, inner, outer.label + "+" + inner.label);
  return generic_rank(model, ext, cfg) == base;
}

Distribution next_ladder_member(const SystemModel& model, const VectorField& f,
                                const Distribution& cur, const SamplingConfig& cfg,
                                const std::string& label) {
  Distribution reduced;
  reduced.label = cur.label;
  reduced.generators = reduced_generators(model, cur, cfg);
  reduced.rank_cache = cur.rank_cache;
  Distribution candidate = sum(reduced, bracket_with(model, f, reduced, label), label);
  Distribution out;
  out.label = label;
  out.generators = reduced_generators(model, candidate, cfg);
  return out;
}

Claim dim_claim(const std::string& item, const std::string& name, int rank, int expected) {
  Claim c;
  c.item = item;
  c.kind = Claim::Kind::DimEquals;
  c.a = name;
  c.expected = expected;
  c.holds = rank == expected;
  c.description = "dim " + name + " = " + sub(rank) + " (expected " + sub(expected) + ")";
  return c;
}

Claim growth_claim(const std::string& item, const std::string& big, int big_rank,
                   const std::string& small, int small_rank, int expected) {
  Claim c;
  c.item = item;
  c.kind = Claim::Kind::Growth;
  c.a = big;
  c.b = small;
  c.expected = expected;
  c.holds = (big_rank - small_rank) == expected;
  c.description = "dim " + big + " = dim " + small + " + " + sub(big_rank - small_rank) +
                  " (expected +" + sub(expected) + ")";
  return c;
}

Claim involutive_claim(const std::string& item, const std::string& name, bool involutive,
                       bool expected) {
  Claim c;
  c.item = item;
  c.kind = Claim::Kind::Involutive;
  c.a = name;
  c.expected = expected ? 1 : 0;
  c.holds = involutive == expected;
  c.description = name + (involutive ? " is involutive" : " is non-involutive") +
                  (c.holds ? "" : expected ? " (expected involutive)" : " (expected non-involutive)");
  return c;
}

Claim full_claim(const std::string& item, const std::string& name, int rank, int dim) {
  Claim c;
  c.item = item;
  c.kind = Claim::Kind::FullSpace;
  c.a = name;
  c.expected = dim;
  c.holds = rank == dim;
  c.description = name + " spans the full space (rank " + sub(rank) + " of " + sub(dim) + ")";
  return c;
}

Claim cauchy_claim(const std::string& item, const std::string& inner, const std::string& outer,
                   bool contained, bool expected_any) {
  Claim c;
  c.item = item;
  c.kind = Claim::Kind::CauchyContainment;
  c.a = inner;
  c.b = outer;
  c.holds = true;  // junction claims record the branch taken, not a failure
  c.expected = contained ? 1 : 0;
  c.description = inner + (contained ? " inside C(" : " not inside C(") + outer + ")";
  (void)expected_any;
  return c;
}

Claim sum_growth_claim(const std::string& item, const std::string& dist,
                       const std::string& closure, int growth, int expected) {
  Claim c;
  c.item = item;
  c.kind = Claim::Kind::SumGrowth;
  c.a = dist;
  c.b = closure;
  c.expected = expected;
  c.holds = growth == expected;
  c.description = "dim ([f," + dist + "] + " + closure + ") = dim " + closure + " + " +
                  sub(growth) + " (expected +" + sub(expected) + ")";
  return c;
}

void reject(BranchTrace& branch, const Claim& failed) {
  branch.accepted = false;
  branch.reject_item = failed.item;
  branch.reject_reason = failed.description;
}

LadderEntry known_entry(const std::string& name, const Distribution& dist, int rank) {
  LadderEntry e;
  e.name = name;
  e.dist = dist;
  e.rank = rank;
  return e;
}

LadderEntry missing_entry(const std::string& name, const Distribution& lo, int lo_rank,
                          const Distribution& hi, const Distribution& closure_hi) {
  LadderEntry e;
  e.missing = true;
  e.name = name;
  e.rank = lo_rank + 1;
  e.lo = lo;
  e.hi = hi;
  e.closure_hi = closure_hi;
  return e;
}

/// Iterates G_i = G_{i-1} + [f, G_{i-1}] demanding involutivity at every
/// step until the full space is reached. Appends claims, table entries and
/// ladder rungs. Returns true and sets branch.s on success.
bool run_terminal_ladder(const SystemModel& model, const SamplingConfig& cfg, DecisionTrace& trace,
                         BranchTrace& branch, Distribution cur, int start_index, char letter,
                         const std::string& item_label, const std::string& suffix) {
  const int dim = model.dim();
  const VectorField f = drift_field(model);
  int rank = generic_rank(model, cur, cfg);
  if (rank == dim) {
    branch.s = start_index;
    branch.items.push_back(full_claim(item_label, cur.label, rank, dim));
    return true;
  }
  for (int i = start_index + 1; i <= dim + 2; ++i) {
    std::string name = std::string(1, letter) + "_" + sub(i) + suffix;
    Distribution next = next_ladder_member(model, f, cur, cfg, name);
    int next_rank = generic_rank(model, next, cfg);
    if (next_rank == rank) {
      Claim c;
      c.item = item_label;
      c.kind = Claim::Kind::Text;
      c.holds = false;
      c.description = "sequence stagnated at " + cur.label + " (rank " + sub(rank) +
                      " < " + sub(dim) + "); the system contains an autonomous subsystem";
      branch.items.push_back(c);
      reject(branch, c);
      return false;
    }
    bool inv = is_involutive(model, next, cfg);
    Claim c = involutive_claim(item_label, name, inv, true);
    branch.items.push_back(c);
    trace.add(model, name, next, cfg);
    branch.ladder.push_back(known_entry(name, next, next_rank));
    if (!inv) {
      reject(branch, c);
      return false;
    }
    if (next_rank == dim) {
      branch.s = i;
      branch.items.push_back(full_claim(item_label, name, next_rank, dim));
      return true;
    }
    cur = next;
    rank = next_rank;
  }
  Claim c;
  c.item = item_label;
  c.kind = Claim::Kind::Text;
  c.holds = false;
  c.description = "sequence exceeded the iteration bound without spanning the full space";
  branch.items.push_back(c);
  reject(branch, c);
  return false;
}

}  // namespace

BracketSequence build_bracket_sequence(const SystemModel& model, const SamplingConfig& cfg) {
  BracketSequence seq;
  const int dim = model.dim();
  const VectorField f = drift_field(model);
  Distribution d0 = input_distribution(model);
  seq.D.push_back(d0);
  seq.dims.push_back(2);
  for (int i = 1; i <= dim + 2; ++i) {
    Distribution next = next_ladder_member(model, f, seq.D.back(), cfg, "D_" + sub(i));
    int rank = generic_rank(model, next, cfg);
    if (rank == seq.dims.back()) {
      seq.stagnated = true;
      return seq;
    }
    seq.D.push_back(next);
    seq.dims.push_back(rank);
    if (!is_involutive(model, next, cfg)) {
      seq.k1 = i;
      return seq;
    }
    if (rank == dim) {
      seq.s_full = i;
      return seq;
    }
  }
  throw InternalError("bracket sequence exceeded the iteration bound");
}

DecisionTrace check_sfl(const SystemModel& model, const SamplingConfig& cfg) {
  DecisionTrace trace;
  trace.stage = Stage::SFL;
  trace.cfg = cfg;
  BracketSequence seq = build_bracket_sequence(model, cfg);
  for (std::size_t i = 0; i < seq.D.size(); ++i) trace.add(model, "D_" + sub(static_cast<int>(i)), seq.D[i], cfg);
  trace.k1 = seq.k1;

  BranchTrace branch;
  branch.id = "main";
  if (seq.k1) {
    Claim c = involutive_claim("sfl", "D_" + sub(*seq.k1), false, true);
    branch.items.push_back(c);
    reject(branch, c);
  } else if (seq.stagnated) {
    Claim c;
    c.item = "sfl";
    c.kind = Claim::Kind::Text;
    c.holds = false;
    c.description = "bracket sequence stagnated before spanning the full space";
    branch.items.push_back(c);
    reject(branch, c);
    trace.diagnosis = "contains an autonomous subsystem";
  } else {
    int s = *seq.s_full;
    Claim c = full_claim("sfl", "D_" + sub(s), seq.dims[s], model.dim());
    // the ladder must span the full space by index n-1
    c.holds = c.holds && s <= model.n() - 1;
    if (s > model.n() - 1)
      c.description += " but only at index " + sub(s) + " > n-1 = " + sub(model.n() - 1);
    branch.items.push_back(c);
    if (c.holds) {
      branch.accepted = true;
      branch.s = s;
      branch.item_path = {"sfl"};
      for (int i = 0; i <= s; ++i)
        branch.ladder.push_back(known_entry("D_" + sub(i), seq.D[i], seq.dims[i]));
    } else {
      reject(branch, c);
    }
  }
  trace.branches.push_back(std::move(branch));
  trace.accepted = trace.branches[0].accepted;
  if (trace.accepted) trace.d = 0;
  return trace;
}

// ------------------------------------------------------------- algWithin

namespace {

/// Pairs (alpha1, alpha2): clears denominators / common factors and fixes
/// the leading sign. Only the direction matters.
void normalize_pair(Expr& a1, Expr& a2) {
  std::vector<Expr> pair = {a1, a2};
  normalize_generator(pair);
  a1 = pair[0];
  a2 = pair[1];
}

std::vector<Expr> residuals(const Codistribution& ann, const VectorField& v) {
  std::vector<Expr> out;
  out.reserve(ann.generators.size());
  for (const OneForm& w : ann.generators) out.push_back(pairing(w, v));
  return out;
}

bool all_zero(const std::vector<Expr>& v, const SampleSpace& space, const SamplingConfig& cfg) {
  for (const Expr& e : v) {
    if (e.is_zero_literal()) continue;
    if (!is_zero(e, space, cfg)) return false;
  }
  return true;
}

int residual_rank(const SystemModel& model, const std::vector<std::vector<Expr>>& cols,
                  const SamplingConfig& cfg) {
  Codistribution fake;
  fake.label = "algWithin residuals";
  for (const auto& c : cols) {
    OneForm w;
    w.comps = c;
    fake.generators.push_back(std::move(w));
  }
  return generic_rank(model, fake, cfg);
}

}  // namespace

std::vector<AlgWithinSolution> solve_alg_within(const SystemModel& model,
                                                const Distribution& D_lo, const VectorField& v1,
                                                const VectorField& v2, const Distribution& D_k1,
                                                const SamplingConfig& cfg,
                                                std::vector<AlgWithinRecord>* records) {
  const VectorField f = drift_field(model);
  const SampleSpace space = model.sample_space();
  (void)D_lo;  // D_{k1-2} is characteristic for D_{k1} automatically (Jacobi)

  const VectorField A = lie_bracket(model, v1, lie_bracket(model, v1, f));
  const VectorField B = lie_bracket(model, v1, lie_bracket(model, v2, f));
  const VectorField C = lie_bracket(model, v2, lie_bracket(model, v2, f));
  const Codistribution ann = annihilator(model, D_k1, cfg, "ann(" + D_k1.label + ")");

  const std::vector<Expr> a = residuals(ann, A);
  const std::vector<Expr> b = residuals(ann, B);
  const std::vector<Expr> c = residuals(ann, C);

  const bool za = all_zero(a, space, cfg);
  const bool zb = all_zero(b, space, cfg);
  const bool zc = all_zero(c, space, cfg);

  int rank = residual_rank(model, {a, b, c}, cfg);
  if (rank == 0)
    throw InternalError(
        "all residuals vanish although the distribution is not characteristic for " + D_k1.label);

  struct Candidate {
    Expr a1, a2;
    std::string note;
  };
  std::vector<Candidate> candidates;

  auto mat_of = [](const std::vector<Expr>& x) {
    std::vector<std::vector<Expr>> m(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) m[i] = {x[i]};
    return m;
  };
  auto mat_of2 = [](const std::vector<Expr>& x, const std::vector<Expr>& y) {
    std::vector<std::vector<Expr>> m(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) m[i] = {x[i], y[i]};
    return m;
  };

  if (rank == 3) {
    // three independent residuals force the trivial solution only
  } else if (rank == 2) {
    if (!za && residual_rank(model, {a, b}, cfg) == 2) {
      // c = kappa1*a + kappa2*b; solvable iff kappa2^2 + 4 kappa1 == 0
      auto kappa = solve_linear(mat_of2(a, b), c, space, cfg);
      if (kappa) {
        Expr crit = simplify((*kappa)[1] * (*kappa)[1] + Expr::integer(4) * (*kappa)[0]);
        if (is_zero(crit, space, cfg))
          candidates.push_back({(*kappa)[1], Expr::integer(-2), "double-root case"});
      }
    } else if (za) {
      // b, c independent: alpha2 must vanish
      candidates.push_back({Expr::integer(1), Expr::integer(0), "first residual vanishes"});
    }
    // remaining rank-2 shapes admit only the trivial solution
  } else {  // rank == 1
    if (!za) {
      auto k1 = solve_linear(mat_of(a), b, space, cfg);
      auto k2 = solve_linear(mat_of(a), c, space, cfg);
      if (k1 && k2) {
        Expr kap1 = (*k1)[0], kap2 = (*k2)[0];
        Expr disc = simplify(kap1 * kap1 - kap2);
        if (is_zero(disc, space, cfg)) {
          candidates.push_back({Expr::neg(kap1), Expr::integer(1), "zero discriminant"});
        } else if (auto root = sqrt_of_square(disc)) {
          candidates.push_back({simplify(Expr::neg(kap1) + *root), Expr::integer(1),
                                "structural square-root discriminant"});
          candidates.push_back({simplify(Expr::neg(kap1) - *root), Expr::integer(1),
                                "structural square-root discriminant"});
        } else {
          SignProbe probe = sign_probe(disc, space, cfg);
          if (probe.all_positive()) {
            Expr root = Expr::apply(Fn::Sqrt, disc);
            candidates.push_back({simplify(Expr::neg(kap1) + root), Expr::integer(1),
                                  "positive discriminant, symbolic square root"});
            candidates.push_back({simplify(Expr::neg(kap1) - root), Expr::integer(1),
                                  "positive discriminant, symbolic square root"});
          } else if (probe.all_negative()) {
            if (records)
              records->push_back(
                  {"-", "-", false, false, "negative discriminant, no real solution"});
          } else {
            if (records)
              records->push_back(
                  {"-", "-", false, false, "discriminant changes sign across samples"});
          }
        }
      }
    } else if (!zb) {
      candidates.push_back({Expr::integer(1), Expr::integer(0), "first residual vanishes"});
      auto kap = solve_linear(mat_of(b), c, space, cfg);
      if (kap)
        candidates.push_back({(*kap)[0], Expr::integer(-2), "second root of the degenerate case"});
    } else if (!zc) {
      candidates.push_back({Expr::integer(1), Expr::integer(0), "only the last residual survives"});
    }
  }

  std::vector<AlgWithinSolution> out;
  for (Candidate& cand : candidates) {
    Expr a1 = cand.a1, a2 = cand.a2;
    normalize_pair(a1, a2);
    // componentwise verification of the quadratic membership
    bool ok = true;
    for (std::size_t k = 0; k < a.size() && ok; ++k) {
      Expr q = simplify(a1 * a1 * a[k] + Expr::integer(2) * a1 * a2 * b[k] + a2 * a2 * c[k]);
      if (!q.is_zero_literal() && !is_zero(q, space, cfg)) ok = false;
    }
    AlgWithinRecord rec;
    rec.alpha1 = a1.str();
    rec.alpha2 = a2.str();
    rec.verified = ok;
    rec.note = ok ? cand.note : "candidate failed componentwise verification (" + cand.note + ")";
    if (records) records->push_back(rec);
    if (!ok) continue;
    AlgWithinSolution sol;
    sol.alpha1 = a1;
    sol.alpha2 = a2;
    sol.normalization = "denominator-cleared, leading coefficient positive";
    VectorField vc;
    vc.comps.reserve(model.dim());
    for (int i = 0; i < model.dim(); ++i)
      vc.comps.push_back(simplify(a1 * v1.comps[i] + a2 * v2.comps[i]));
    sol.vc = std::move(vc);
    out.push_back(std::move(sol));
  }
  if (out.size() > 2) throw InternalError("more than two algWithin solutions survived");
  (void)zc;
  return out;
}

// ------------------------------------------------------------------ d1

DecisionTrace check_d1(const SystemModel& model, const SamplingConfig& cfg) {
  DecisionTrace trace;
  trace.stage = Stage::D1;
  trace.cfg = cfg;
  const int dim = model.dim();
  const VectorField f = drift_field(model);
  BracketSequence seq = build_bracket_sequence(model, cfg);
  if (!seq.k1) throw InternalError("check_d1 requires a non-involutive member of the D-sequence");
  const int k1 = *seq.k1;
  trace.k1 = k1;
  for (int i = 0; i <= k1; ++i) trace.add(model, "D_" + sub(i), seq.D[i], cfg);

  BranchTrace branch;
  branch.id = "main";
  branch.item_path = {"1"};

  bool dims_ok = true;
  for (int i = 1; i <= k1; ++i) {
    Claim c = dim_claim("1", "D_" + sub(i), seq.dims[i], 2 * (i + 1));
    trace.shared_items.push_back(c);
    if (!c.holds) {
      dims_ok = false;
      reject(branch, c);
      break;
    }
  }
  trace.shared_path = {"1"};

  if (dims_ok) {
    const Distribution& Dk = seq.D[k1];
    const Distribution& Dkm1 = seq.D[k1 - 1];
    Distribution cau = cauchy_characteristic(model, Dk, cfg, "C(D_" + sub(k1) + ")");
    trace.add(model, "C(D_" + sub(k1) + ")", cau, cfg);
    bool contained = contained_in(model, Dkm1, cau, cfg);
    branch.items.push_back(
        cauchy_claim("2", "D_" + sub(k1 - 1), "D_" + sub(k1), contained, true));

    for (int i = 0; i <= k1 - 1; ++i)
      branch.ladder.push_back(known_entry("D_" + sub(i), seq.D[i], seq.dims[i]));

    bool junction_ok = true;
    Distribution start;
    int start_index = 0;
    if (contained) {
      branch.item_path.push_back("2a");
      Distribution clos =
          involutive_closure(model, Dk, cfg, "E_" + sub(k1 + 1));
      int clos_rank = generic_rank(model, clos, cfg);
      Claim ci = growth_claim("2a.I", clos.label, clos_rank, "D_" + sub(k1), seq.dims[k1], 1);
      ci.description = "dim closure(D_" + sub(k1) + ") = dim D_" + sub(k1) + " + " +
                       sub(clos_rank - seq.dims[k1]) + " (expected +1)";
      branch.items.push_back(ci);
      if (!ci.holds) {
        reject(branch, ci);
        junction_ok = false;
      } else {
        trace.add(model, clos.label, clos, cfg);
        if (clos_rank < dim) {
          Distribution lie = sum(bracket_with(model, f, Dk, "[f,D]"), clos, "[f,D]+closure");
          int growth = generic_rank(model, lie, cfg) - clos_rank;
          Claim cii = sum_growth_claim("2a.II", "D_" + sub(k1), clos.label, growth, 1);
          branch.items.push_back(cii);
          if (!cii.holds) {
            reject(branch, cii);
            junction_ok = false;
          }
        } else {
          branch.items.push_back(full_claim("2a.II", clos.label, clos_rank, dim));
        }
        if (junction_ok) {
          branch.ladder.push_back(missing_entry("E_" + sub(k1), Dkm1, seq.dims[k1 - 1], Dk, clos));
          branch.ladder.push_back(known_entry(clos.label, clos, clos_rank));
          start = clos;
          start_index = k1 + 1;
        }
      }
    } else {
      branch.item_path.push_back("2b");
      Distribution ek1 = sum(Dkm1, cau, "E_" + sub(k1));
      Distribution stored;
      stored.label = ek1.label;
      stored.generators = reduced_generators(model, ek1, cfg);
      bool inv = is_involutive(model, stored, cfg);
      trace.add(model, stored.label, stored, cfg);
      Claim c = involutive_claim("2b", stored.label, inv, true);
      branch.items.push_back(c);
      if (!inv) {
        reject(branch, c);
        junction_ok = false;
      } else {
        branch.ladder.push_back(
            known_entry(stored.label, stored, generic_rank(model, stored, cfg)));
        start = stored;
        start_index = k1;
      }
    }

    if (junction_ok) {
      branch.item_path.push_back("3");
      if (run_terminal_ladder(model, cfg, trace, branch, start, start_index, 'E', "3", "")) {
        branch.accepted = true;
      }
    }
  }

  trace.branches.push_back(std::move(branch));
  trace.accepted = trace.branches[0].accepted;
  if (trace.accepted) trace.d = 1;
  return trace;
}

// ------------------------------------------------------------------ d2

namespace {

struct Item4Input {
  Distribution e_prev;  // E_{k2-1}
  Distribution e_k2;    // E_{k2}
  int k2 = 0;
  bool only_4a_II = false;  // the 2aB route enters item 4a at its second condition
};

/// Items 4 and 5 of the difference-2 test, shared by every route.
void run_item4_and_5(const SystemModel& model, const SamplingConfig& cfg, DecisionTrace& trace,
                     BranchTrace& branch, const Item4Input& in, const std::string& suffix) {
  const int dim = model.dim();
  const VectorField f = drift_field(model);
  const int k2 = in.k2;
  branch.k2 = k2;

  Distribution f_start;
  int f_start_index = 0;

  if (in.only_4a_II) {
    branch.item_path.push_back("4a.II");
    Distribution clos =
        involutive_closure(model, in.e_k2, cfg, "F_" + sub(k2 + 1) + suffix);
    int clos_rank = generic_rank(model, clos, cfg);
    trace.add(model, clos.label, clos, cfg);
    if (clos_rank < dim) {
      Distribution lie = sum(bracket_with(model, f, in.e_k2, "[f,E]"), clos, "[f,E]+closure");
      int growth = generic_rank(model, lie, cfg) - clos_rank;
      Claim cii = sum_growth_claim("4a.II", in.e_k2.label, clos.label, growth, 1);
      branch.items.push_back(cii);
      if (!cii.holds) {
        reject(branch, cii);
        return;
      }
    } else {
      branch.items.push_back(full_claim("4a.II", clos.label, clos_rank, dim));
    }
    branch.ladder.push_back(missing_entry("F_" + sub(k2) + suffix, in.e_prev,
                                          generic_rank(model, in.e_prev, cfg), in.e_k2, clos));
    branch.ladder.push_back(known_entry(clos.label, clos, clos_rank));
    f_start = clos;
    f_start_index = k2 + 1;
  } else {
    bool contained = subset_of_cauchy(model, in.e_prev, in.e_k2, cfg);
    branch.items.push_back(cauchy_claim("4", in.e_prev.label, in.e_k2.label, contained, true));
    if (contained) {
      branch.item_path.push_back("4a");
      Distribution clos =
          involutive_closure(model, in.e_k2, cfg, "F_" + sub(k2 + 1) + suffix);
      int clos_rank = generic_rank(model, clos, cfg);
      int e_rank = generic_rank(model, in.e_k2, cfg);
      Claim ci = growth_claim("4a.I", clos.label, clos_rank, in.e_k2.label, e_rank, 1);
      ci.description = "dim closure(" + in.e_k2.label + ") = dim " + in.e_k2.label + " + " +
                       sub(clos_rank - e_rank) + " (expected +1)";
      branch.items.push_back(ci);
      if (!ci.holds) {
        reject(branch, ci);
        return;
      }
      trace.add(model, clos.label, clos, cfg);
      if (clos_rank < dim) {
        Distribution lie = sum(bracket_with(model, f, in.e_k2, "[f,E]"), clos, "[f,E]+closure");
        int growth = generic_rank(model, lie, cfg) - clos_rank;
        Claim cii = sum_growth_claim("4a.II", in.e_k2.label, clos.label, growth, 1);
        branch.items.push_back(cii);
        if (!cii.holds) {
          reject(branch, cii);
          return;
        }
      } else {
        branch.items.push_back(full_claim("4a.II", clos.label, clos_rank, dim));
      }
      branch.ladder.push_back(missing_entry("F_" + sub(k2) + suffix, in.e_prev,
                                            generic_rank(model, in.e_prev, cfg), in.e_k2, clos));
      branch.ladder.push_back(known_entry(clos.label, clos, clos_rank));
      f_start = clos;
      f_start_index = k2 + 1;
    } else {
      branch.item_path.push_back("4b");
      Distribution cc = cauchy_characteristic(model, in.e_k2, cfg, "C(" + in.e_k2.label + ")");
      trace.add(model, cc.label, cc, cfg);
      Distribution fk2 = sum(in.e_prev, cc, "F_" + sub(k2) + suffix);
      Distribution stored;
      stored.label = fk2.label;
      stored.generators = reduced_generators(model, fk2, cfg);
      bool inv = is_involutive(model, stored, cfg);
      trace.add(model, stored.label, stored, cfg);
      Claim c = involutive_claim("4b", stored.label, inv, true);
      branch.items.push_back(c);
      if (!inv) {
        reject(branch, c);
        return;
      }
      branch.ladder.push_back(known_entry(stored.label, stored, generic_rank(model, stored, cfg)));
      f_start = stored;
      f_start_index = k2;
    }
  }

  branch.item_path.push_back("5");
  if (run_terminal_ladder(model, cfg, trace, branch, f_start, f_start_index, 'F', "5", suffix))
    branch.accepted = true;
}

/// Item 3b: iterates E_i = E_{i-1} + [f, E_{i-1}] from an involutive start,
/// checking dim E_i = 2i+1, until the first non-involutive E_{k2}; then
/// hands over to items 4 and 5.
void run_e_ladder_then_4_5(const SystemModel& model, const SamplingConfig& cfg,
                           DecisionTrace& trace, BranchTrace& branch, Distribution cur,
                           int start_index, const std::string& suffix) {
  branch.item_path.push_back("3b");
  const int dim = model.dim();
  const VectorField f = drift_field(model);
  Distribution prev = cur;
  int prev_rank = generic_rank(model, cur, cfg);
  // the dimension condition only applies up to k2, so its claims are held
  // back until a non-involutive member settles that k2 exists
  std::vector<Claim> pending_dims;
  for (int i = start_index + 1; i <= dim + 2; ++i) {
    std::string name = "E_" + sub(i) + suffix;
    Distribution next = next_ladder_member(model, f, prev, cfg, name);
    int rank = generic_rank(model, next, cfg);
    if (rank == prev_rank) {
      Claim c;
      c.item = "3b.I";
      c.kind = Claim::Kind::Text;
      c.holds = false;
      c.description = "E-sequence stagnated at " + prev.label + " (rank " + sub(prev_rank) +
                      "); no non-involutive member exists";
      branch.items.push_back(c);
      reject(branch, c);
      return;
    }
    trace.add(model, name, next, cfg);
    pending_dims.push_back(dim_claim("3b.II", name, rank, 2 * i + 1));
    bool inv = is_involutive(model, next, cfg);
    if (!inv) {
      Claim c;
      c.item = "3b.I";
      c.kind = Claim::Kind::Involutive;
      c.a = name;
      c.expected = 0;
      c.holds = true;
      c.description = name + " is non-involutive: k2 = " + sub(i);
      branch.items.push_back(c);
      for (const Claim& dc : pending_dims) {
        branch.items.push_back(dc);
        if (!dc.holds) {
          reject(branch, dc);
          return;
        }
      }
      Item4Input in;
      in.e_prev = prev;
      in.e_k2 = next;
      in.k2 = i;
      run_item4_and_5(model, cfg, trace, branch, in, suffix);
      return;
    }
    branch.ladder.push_back(known_entry(name, next, rank));
    if (rank == dim) {
      Claim c;
      c.item = "3b.I";
      c.kind = Claim::Kind::Text;
      c.holds = false;
      c.description = "E-sequence reached the full space involutively; no k2 exists "
                      "(the difference-1 conditions apply instead)";
      branch.items.push_back(c);
      reject(branch, c);
      return;
    }
    prev = next;
    prev_rank = rank;
  }
  Claim c;
  c.item = "3b.I";
  c.kind = Claim::Kind::Text;
  c.holds = false;
  c.description = "E-sequence exceeded the iteration bound";
  branch.items.push_back(c);
  reject(branch, c);
}

}  // namespace

DecisionTrace check_d2(const SystemModel& model, const SamplingConfig& cfg) {
  DecisionTrace trace;
  trace.stage = Stage::D2;
  trace.cfg = cfg;
  const VectorField f = drift_field(model);
  BracketSequence seq = build_bracket_sequence(model, cfg);
  if (!seq.k1) throw InternalError("check_d2 requires a non-involutive member of the D-sequence");
  const int k1 = *seq.k1;
  trace.k1 = k1;
  for (int i = 0; i <= k1; ++i) trace.add(model, "D_" + sub(i), seq.D[i], cfg);

  trace.shared_path = {"1"};
  bool dims_ok = true;
  for (int i = 1; i <= k1; ++i) {
    Claim c = dim_claim("1", "D_" + sub(i), seq.dims[i], 2 * (i + 1));
    trace.shared_items.push_back(c);
    if (!c.holds) {
      dims_ok = false;
      break;
    }
  }
  if (!dims_ok) {
    BranchTrace branch;
    branch.id = "main";
    branch.item_path = {"1"};
    reject(branch, trace.shared_items.back());
    trace.branches.push_back(std::move(branch));
    return trace;
  }

  const Distribution& Dk = seq.D[k1];
  const Distribution& Dkm1 = seq.D[k1 - 1];
  Distribution Dkm2;  // zero distribution when k1 == 1
  Dkm2.label = "D_" + sub(k1 - 2);
  if (k1 >= 2) Dkm2 = seq.D[k1 - 2];

  Distribution cau = cauchy_characteristic(model, Dk, cfg, "C(D_" + sub(k1) + ")");
  trace.add(model, cau.label, cau, cfg);
  bool contained = contained_in(model, Dkm1, cau, cfg);
  Claim junction = cauchy_claim("2", "D_" + sub(k1 - 1), "D_" + sub(k1), contained, true);
  trace.shared_items.push_back(junction);

  auto d_prefix = [&](BranchTrace& branch, int upto) {
    for (int i = 0; i <= upto; ++i)
      branch.ladder.push_back(known_entry("D_" + sub(i), seq.D[i], seq.dims[i]));
  };

  if (contained) {  // item 2a
    BranchTrace branch;
    branch.id = "main";
    branch.item_path = {"1"};
    Distribution clos = involutive_closure(model, Dk, cfg, "closure(D_" + sub(k1) + ")");
    int clos_rank = generic_rank(model, clos, cfg);
    int growth = clos_rank - seq.dims[k1];
    if (growth == 1) {  // 2aA
      branch.item_path.push_back("2aA");
      Claim ci = growth_claim("2aA", clos.label, clos_rank, "D_" + sub(k1), seq.dims[k1], 1);
      branch.items.push_back(ci);
      Distribution lie = sum(bracket_with(model, f, Dk, "[f,D]"), clos, "[f,D]+closure");
      int sgrowth = generic_rank(model, lie, cfg) - clos_rank;
      Claim cii = sum_growth_claim("2aA", "D_" + sub(k1), clos.label, sgrowth, 1);
      branch.items.push_back(cii);
      if (!cii.holds) {
        reject(branch, cii);
      } else {
        Distribution e_next = clos;
        e_next.label = "E_" + sub(k1 + 1);
        trace.add(model, e_next.label, e_next, cfg);
        d_prefix(branch, k1 - 1);
        branch.ladder.push_back(missing_entry("E_" + sub(k1), Dkm1, seq.dims[k1 - 1], Dk, clos));
        branch.ladder.push_back(known_entry(e_next.label, e_next, clos_rank));
        // continue with item 3b: iterate E_i until the next non-involutive member
        run_e_ladder_then_4_5(model, cfg, trace, branch, e_next, k1 + 1, "");
      }
    } else if (growth == 2) {  // 2aB
      branch.item_path.push_back("2aB");
      Claim ci = growth_claim("2aB", clos.label, clos_rank, "D_" + sub(k1), seq.dims[k1], 2);
      branch.items.push_back(ci);
      Distribution dflag = derived_flag(model, Dk, cfg, "D_" + sub(k1) + "^(1)");
      trace.add(model, dflag.label, dflag, cfg);
      Distribution cc = cauchy_characteristic(model, dflag, cfg, "C(" + dflag.label + ")");
      trace.add(model, cc.label, cc, cfg);
      Distribution lie = sum(bracket_with(model, f, cc, "[f,C]"), dflag, "[f,C]+D^(1)");
      int sgrowth = generic_rank(model, lie, cfg) - generic_rank(model, dflag, cfg);
      Claim cii = sum_growth_claim("2aB", cc.label, dflag.label, sgrowth, 0);
      cii.description = "[f," + cc.label + "] inside " + dflag.label +
                        (sgrowth == 0 ? "" : " fails (grows by " + sub(sgrowth) + ")");
      branch.items.push_back(cii);
      if (!cii.holds) {
        reject(branch, cii);
      } else {
        Distribution e_k2 = dflag;
        e_k2.label = "E_" + sub(k1 + 1);
        trace.add(model, e_k2.label, e_k2, cfg);
        Distribution e_prev = cc;
        e_prev.label = "E_" + sub(k1);
        trace.add(model, e_prev.label, e_prev, cfg);
        d_prefix(branch, k1 - 1);
        branch.ladder.push_back(known_entry(e_prev.label, e_prev, generic_rank(model, cc, cfg)));
        Item4Input in;
        in.e_prev = e_prev;
        in.e_k2 = e_k2;
        in.k2 = k1 + 1;
        in.only_4a_II = true;
        run_item4_and_5(model, cfg, trace, branch, in, "");
      }
    } else {
      branch.item_path.push_back("2a");
      Claim c = growth_claim("2a", clos.label, clos_rank, "D_" + sub(k1), seq.dims[k1], 1);
      c.holds = false;
      c.description = "dim closure(D_" + sub(k1) + ") = dim D_" + sub(k1) + " + " + sub(growth) +
                      " (expected +1 or +2)";
      branch.items.push_back(c);
      reject(branch, c);
    }
    trace.branches.push_back(std::move(branch));
  } else {  // item 2b
    // completion pair: first two D_{k1-1} generators independent mod D_{k1-2}
    std::vector<VectorField> pair;
    {
      Distribution acc = Dkm2;
      acc.label = "completion";
      acc.rank_cache.reset();
      acc.involutive_cache.reset();
      for (const VectorField& g : Dkm1.generators) {
        if (pair.size() == 2) break;
        if (!contains(model, acc, g, cfg)) {
          pair.push_back(g);
          acc = with_field(acc, g, "completion");
        }
      }
      if (pair.size() != 2)
        throw DegeneracyError("could not complete D_" + sub(k1 - 2) + " to D_" + sub(k1 - 1));
    }
    std::vector<AlgWithinSolution> sols =
        solve_alg_within(model, Dkm2, pair[0], pair[1], Dk, cfg, &trace.alg_records);

    // build candidate branch distributions and apply the Cauchy filter
    struct Prepared {
      AlgWithinSolution sol;
      Distribution e_lo, e_k1;
      bool survives;
      std::size_t record_index;
    };
    std::vector<Prepared> prepared;
    std::size_t rec_i = 0;
    for (const AlgWithinSolution& sol : sols) {
      // records are appended in candidate order; find the matching verified one
      while (rec_i < trace.alg_records.size() && !trace.alg_records[rec_i].verified) ++rec_i;
      Prepared p{sol, {}, {}, false, rec_i++};
      prepared.push_back(std::move(p));
    }
    int survivors = 0;
    for (Prepared& p : prepared) {
      Distribution e_lo = with_field(Dkm2, p.sol.vc, "E_lo");
      Distribution e_k1 = with_field(Dkm1, lie_bracket(model, p.sol.vc, f), "E_k1");
      p.e_lo = e_lo;
      p.e_k1 = e_k1;
      p.survives = subset_of_cauchy(model, e_lo, e_k1, cfg);
      if (p.record_index < trace.alg_records.size())
        trace.alg_records[p.record_index].survived_filter = p.survives;
      if (p.survives) ++survivors;
    }
    if (survivors == 0) {
      BranchTrace branch;
      branch.id = "main";
      branch.item_path = {"1", "2b"};
      Claim c;
      c.item = "2b";
      c.kind = Claim::Kind::Text;
      c.holds = false;
      c.description = sols.empty()
                          ? "the quadratic membership condition admits no non-trivial solution"
                          : "no candidate direction is characteristic for its E-distribution";
      branch.items.push_back(c);
      reject(branch, c);
      trace.branches.push_back(std::move(branch));
    } else {
      int branch_no = 0;
      for (Prepared& p : prepared) {
        if (!p.survives) continue;
        ++branch_no;
        std::string suffix = survivors >= 2 ? "," + sub(branch_no) : "";
        BranchTrace branch;
        branch.id = sub(branch_no);
        branch.solution = p.sol;
        branch.item_path = {"1", "2b"};
        Distribution e_lo = p.e_lo;
        e_lo.label = "E_" + sub(k1 - 1) + suffix;
        Distribution e_k1;
        e_k1.label = "E_" + sub(k1) + suffix;
        e_k1.generators = reduced_generators(model, p.e_k1, cfg);
        trace.add(model, e_lo.label, e_lo, cfg);
        trace.add(model, e_k1.label, e_k1, cfg);
        branch.items.push_back(
            cauchy_claim("2b", e_lo.label, e_k1.label, true, true));

        if (!is_involutive(model, e_k1, cfg)) {  // item 3a: k2 = k1
          branch.item_path.push_back("3a");
          branch.k2 = k1;
          Distribution clos =
              involutive_closure(model, e_k1, cfg, "F_" + sub(k1 + 1) + suffix);
          int clos_rank = generic_rank(model, clos, cfg);
          int e_rank = generic_rank(model, e_k1, cfg);
          Claim ci = growth_claim("3a.I", clos.label, clos_rank, e_k1.label, e_rank, 1);
          ci.description = "dim closure(" + e_k1.label + ") = dim " + e_k1.label + " + " +
                           sub(clos_rank - e_rank) + " (expected +1)";
          branch.items.push_back(ci);
          if (!ci.holds) {
            reject(branch, ci);
          } else {
            trace.add(model, clos.label, clos, cfg);
            Distribution lie = sum(bracket_with(model, f, e_k1, "[f,E]"), clos, "[f,E]+closure");
            int growth = generic_rank(model, lie, cfg) - clos_rank;
            Claim cii = sum_growth_claim("3a.II", e_k1.label, clos.label, growth, 1);
            branch.items.push_back(cii);
            if (!cii.holds) {
              reject(branch, cii);
            } else {
              d_prefix(branch, k1 - 2);
              branch.ladder.push_back(
                  known_entry(e_lo.label, e_lo, generic_rank(model, e_lo, cfg)));
              branch.ladder.push_back(missing_entry("F_" + sub(k1) + suffix, e_lo,
                                                    generic_rank(model, e_lo, cfg), e_k1, clos));
              branch.ladder.push_back(known_entry(clos.label, clos, clos_rank));
              branch.item_path.push_back("5");
              if (run_terminal_ladder(model, cfg, trace, branch, clos, k1 + 1, 'F', "5", suffix))
                branch.accepted = true;
            }
          }
        } else {  // item 3b: iterate E_i
          d_prefix(branch, k1 - 1);
          branch.ladder.push_back(known_entry(e_k1.label, e_k1, generic_rank(model, e_k1, cfg)));
          run_e_ladder_then_4_5(model, cfg, trace, branch, e_k1, k1, suffix);
        }
        trace.branches.push_back(std::move(branch));
      }
    }
  }

  for (const BranchTrace& b : trace.branches)
    if (b.accepted) trace.accepted = true;
  if (trace.accepted) trace.d = 2;
  return trace;
}

// ------------------------------------------------------------- classify

const DecisionTrace* ClassifyOutcome::accepted_trace() const {
  if (sfl.accepted) return &sfl;
  if (d1 && d1->accepted) return &*d1;
  if (d2 && d2->accepted) return &*d2;
  return nullptr;
}

ClassifyOutcome classify(const SystemModel& model, int dmax, const SamplingConfig& cfg) {
  ClassifyOutcome out;
  out.dmax = dmax;
  out.sfl = check_sfl(model, cfg);
  if (out.sfl.accepted) {
    out.verdict = "static feedback linearizable (d=0)";
    out.d = 0;
    return out;
  }
  if (!out.sfl.k1) {
    out.verdict = "not flat: contains an autonomous subsystem";
    out.diagnosis = out.sfl.diagnosis;
    return out;
  }
  if (dmax >= 1) {
    out.d1 = check_d1(model, cfg);
    if (out.d1->accepted) {
      out.verdict = "flat with difference d=1";
      out.d = 1;
      return out;
    }
  }
  if (dmax >= 2) {
    out.d2 = check_d2(model, cfg);
    if (out.d2->accepted) {
      out.verdict = "flat with difference d=2";
      out.d = 2;
      return out;
    }
  }
  out.verdict = dmax >= 2 ? "flat only with d >= 3, or not flat"
                          : "not flat with d <= " + sub(dmax);
  return out;
}

// --------------------------------------------------------------- replay

bool replay_trace(const SystemModel& model, const DecisionTrace& trace, const SamplingConfig& cfg,
                  std::string* why) {
  auto fail = [&](const std::string& m) {
    if (why) *why = m;
    return false;
  };
  const VectorField f = drift_field(model);
  std::vector<const Claim*> claims;
  for (const Claim& c : trace.shared_items) claims.push_back(&c);
  for (const BranchTrace& b : trace.branches)
    for (const Claim& c : b.items) claims.push_back(&c);
  for (const Claim* cp : claims) {
    const Claim& c = *cp;
    const Distribution* A = trace.find(c.a);
    const Distribution* B = c.b.empty() ? nullptr : trace.find(c.b);
    switch (c.kind) {
      case Claim::Kind::DimEquals: {
        if (!A) break;
        bool ok = (generic_rank(model, *A, cfg) == c.expected) == c.holds;
        if (!ok) return fail("dimension claim failed on replay: " + c.description);
        break;
      }
      case Claim::Kind::Growth: {
        if (!A || !B) break;
        bool ok = ((generic_rank(model, *A, cfg) - generic_rank(model, *B, cfg)) == c.expected) ==
                  c.holds;
        if (!ok) return fail("growth claim failed on replay: " + c.description);
        break;
      }
      case Claim::Kind::SumGrowth: {
        if (!A || !B) break;
        Distribution lie = sum(bracket_with(model, f, *A, "[f,.]"), *B, "[f,.]+.");
        bool ok = ((generic_rank(model, lie, cfg) - generic_rank(model, *B, cfg)) == c.expected) ==
                  c.holds;
        if (!ok) return fail("bracket-growth claim failed on replay: " + c.description);
        break;
      }
      case Claim::Kind::Involutive: {
        if (!A) break;
        Distribution copy = *A;
        copy.involutive_cache.reset();
        bool ok = (is_involutive(model, copy, cfg) == (c.expected == 1)) == c.holds;
        if (!ok) return fail("involutivity claim failed on replay: " + c.description);
        break;
      }
      case Claim::Kind::FullSpace: {
        if (!A) break;
        bool ok = (generic_rank(model, *A, cfg) == model.dim()) == c.holds;
        if (!ok) return fail("full-space claim failed on replay: " + c.description);
        break;
      }
      case Claim::Kind::CauchyContainment: {
        if (!A || !B) break;
        bool contained = subset_of_cauchy(model, *A, *B, cfg);
        if (contained != (c.expected == 1))
          return fail("containment claim failed on replay: " + c.description);
        break;
      }
      case Claim::Kind::Text:
        break;
    }
  }
  return true;
}

}  // namespace flatcheck
