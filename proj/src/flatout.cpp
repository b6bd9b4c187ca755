#include "flatcheck/flatout.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "flatcheck/errors.hpp"
#include "flatcheck/simplify.hpp"

namespace flatcheck {

namespace {

bool depends_on(const Expr& e, const std::string& name) {
  if (e.kind() == Kind::Var || e.kind() == Kind::Constant) return e.name() == name;
  for (const Expr& k : e.kids())
    if (depends_on(k, name)) return true;
  return false;
}

// ------------------------------------------------------------ antiderivative

/// Antiderivative over a fixed menu: z-free factors pulled out, powers of an
/// affine-in-z base, single sin/cos/exp/sqrt/log of an affine argument.
std::optional<Expr> antiderivative(const Expr& e, const std::string& z) {
  if (!depends_on(e, z)) return e * Expr::variable(z);
  if (e.kind() == Kind::Add) {
    std::vector<Expr> parts;
    for (const Expr& k : e.kids()) {
      auto p = antiderivative(k, z);
      if (!p) return std::nullopt;
      parts.push_back(*p);
    }
    return Expr::add(std::move(parts));
  }
  detail::Factors f = detail::decompose(e);
  Expr dep_base = Expr::integer(0);
  int dep_power = 0;
  std::vector<Expr> indep = {Expr::rational(f.coeff)};
  for (const auto& [base, power] : f.powers) {
    if (!depends_on(base, z)) {
      indep.push_back(Expr::pow(base, power));
      continue;
    }
    if (dep_power != 0) return std::nullopt;  // more than one z-dependent factor
    dep_base = base;
    dep_power = power;
  }
  if (dep_power == 0) return std::nullopt;
  Expr indep_prod = Expr::mul(std::move(indep));

  if (dep_base.kind() == Kind::Fun) {
    if (dep_power != 1) return std::nullopt;
    const Expr& arg = dep_base.kids()[0];
    Expr alpha = simplify(differentiate(arg, z));
    if (alpha.is_zero_literal() || depends_on(alpha, z)) return std::nullopt;
    Expr inner;
    switch (dep_base.fn()) {
      case Fn::Sin: inner = Expr::neg(Expr::apply(Fn::Cos, arg)); break;
      case Fn::Cos: inner = Expr::apply(Fn::Sin, arg); break;
      case Fn::Exp: inner = Expr::apply(Fn::Exp, arg); break;
      case Fn::Sqrt:
        inner = Expr::div(Expr::integer(2), Expr::integer(3)) * arg * Expr::apply(Fn::Sqrt, arg);
        break;
      case Fn::Log:
        inner = arg * Expr::apply(Fn::Log, arg) - arg;
        break;
      default:
        return std::nullopt;
    }
    return simplify(Expr::div(indep_prod * inner, alpha));
  }

  Expr alpha = simplify(differentiate(dep_base, z));
  if (alpha.is_zero_literal() || depends_on(alpha, z)) return std::nullopt;
  if (dep_power == -1)
    return simplify(Expr::div(indep_prod * Expr::apply(Fn::Log, dep_base), alpha));
  Expr up = Expr::pow(dep_base, dep_power + 1);
  return simplify(Expr::div(indep_prod * up, Expr::integer(dep_power + 1) * alpha));
}

// ------------------------------------------------------- integration core

struct Partner {
  Expr fn;
  OneForm diff;
};

/// phi accumulated by antidifferentiating the running residual coordinate by
/// coordinate, skipping `skip`; the caller decides what the final residual
/// may look like.
struct PartialPotential {
  bool ok = false;
  Expr phi;
  OneForm residual;
};

PartialPotential potential_skip(const SystemModel& model, const OneForm& w,
                                const std::set<std::string>& skip) {
  PartialPotential out;
  std::vector<std::string> coords = model.coordinates();
  Expr phi = Expr::integer(0);
  OneForm r = w;
  for (int i = 0; i < model.dim(); ++i) {
    if (skip.count(coords[i])) continue;
    Expr ri = simplify(r.comps[i]);
    if (ri.is_zero_literal()) continue;
    auto g = antiderivative(ri, coords[i]);
    if (!g) return out;
    phi = simplify(phi + *g);
    OneForm dphi = differential(model, phi);
    for (int k = 0; k < model.dim(); ++k) r.comps[k] = simplify(w.comps[k] - dphi.comps[k]);
  }
  out.ok = true;
  out.phi = phi;
  out.residual = r;
  return out;
}

/// Tests residual == sum mu_j d(psi_j); empty partner list demands a
/// residual that vanishes identically.
bool residual_in_partner_span(const SystemModel& model, const OneForm& r,
                              const std::vector<Partner>& partners, const SamplingConfig& cfg) {
  SampleSpace space = model.sample_space();
  bool nonzero = false;
  for (const Expr& c : r.comps)
    if (!c.is_zero_literal()) nonzero = true;
  if (!nonzero) return true;
  if (partners.empty()) {
    for (const Expr& c : r.comps)
      if (!c.is_zero_literal() && !is_zero(c, space, cfg)) return false;
    return true;
  }
  std::vector<std::vector<Expr>> m(model.dim(), std::vector<Expr>(partners.size()));
  for (std::size_t j = 0; j < partners.size(); ++j)
    for (int i = 0; i < model.dim(); ++i) m[i][j] = partners[j].diff.comps[i];
  std::vector<Expr> rhs = r.comps;
  try {
    return solve_linear(m, rhs, space, cfg).has_value();
  } catch (const SamplingError&) {
    return false;
  } catch (const DegeneracyError&) {
    return false;
  }
}

std::vector<std::set<std::string>> skip_sets(const SystemModel& model,
                                             const std::vector<Partner>& partners) {
  std::vector<std::set<std::string>> sets;
  sets.push_back({});  // plain attempt first
  std::vector<std::string> coords = model.coordinates();
  auto support = [&](const Partner& p) {
    std::set<std::string> s;
    for (int i = 0; i < model.dim(); ++i)
      if (!p.diff.comps[i].is_zero_literal()) s.insert(coords[i]);
    return s;
  };
  std::set<std::string> all;
  for (const Partner& p : partners) {
    std::set<std::string> s = support(p);
    all.insert(s.begin(), s.end());
    if (!s.empty() && std::find(sets.begin(), sets.end(), s) == sets.end()) sets.push_back(s);
  }
  if (!all.empty() && std::find(sets.begin(), sets.end(), all) == sets.end()) sets.push_back(all);
  return sets;
}

std::vector<OneForm> multiplier_menu(const OneForm& w) {
  std::vector<OneForm> out;
  std::vector<Expr> comps;
  for (const Expr& c : w.comps) {
    Expr s = simplify(c);
    if (!s.is_zero_literal() && !s.is_one_literal()) comps.push_back(s);
  }
  auto scaled = [&](const Expr& denom) {
    OneForm v;
    v.comps.reserve(w.comps.size());
    for (const Expr& c : w.comps) v.comps.push_back(simplify(Expr::div(c, denom)));
    return v;
  };
  const std::size_t cap = 40;
  for (const Expr& c : comps) {
    if (out.size() >= cap) break;
    out.push_back(scaled(c));
  }
  for (const Expr& c : comps) {
    if (out.size() >= cap) break;
    out.push_back(scaled(simplify(c * c)));
  }
  for (std::size_t i = 0; i < comps.size(); ++i)
    for (std::size_t j = i + 1; j < comps.size(); ++j) {
      if (out.size() >= cap) break;
      out.push_back(scaled(simplify(comps[i] * comps[j])));
    }
  return out;
}

/// Potential of w modulo the span of the partner differentials, over the
/// multiplier menu. Success means d(phi) = mu*w + sum c_j d(psi_j) for a
/// nonvanishing menu multiplier mu, i.e. d(phi) stays inside span{w, dpsi}.
std::optional<Expr> integrate_with_partners(const SystemModel& model, const OneForm& w,
                                            const std::vector<Partner>& partners,
                                            const SamplingConfig& cfg) {
  std::vector<OneForm> candidates = {w};
  for (OneForm& m : multiplier_menu(w)) candidates.push_back(std::move(m));
  std::vector<std::set<std::string>> skips = skip_sets(model, partners);
  for (const OneForm& cand : candidates) {
    for (const std::set<std::string>& skip : skips) {
      PartialPotential pot = potential_skip(model, cand, skip);
      if (!pot.ok) continue;
      bool trivial = pot.phi.is_zero_literal();
      if (trivial) continue;
      try {
        if (residual_in_partner_span(model, pot.residual, partners, cfg))
          return simplify(pot.phi);
      } catch (const SamplingError&) {
      }
    }
  }
  return std::nullopt;
}

Codistribution forms_codistribution(const std::vector<OneForm>& forms, const std::string& label) {
  Codistribution c;
  c.label = label;
  c.generators = forms;
  return c;
}

int form_rank(const SystemModel& model, const std::vector<OneForm>& forms,
              const SamplingConfig& cfg) {
  if (forms.empty()) return 0;
  return generic_rank(model, forms_codistribution(forms, "forms"), cfg);
}

}  // namespace

std::optional<Expr> integrate_one_form(const OneForm& w, const SystemModel& model,
                                       const SamplingConfig& cfg) {
  return integrate_with_partners(model, w, {}, cfg);
}

// -------------------------------------------- missing-distribution splice

Distribution complete_missing_distribution(const SystemModel& model, const Distribution& lo,
                                           const Distribution& hi, const Distribution& closure_hi,
                                           const SamplingConfig& cfg, const std::string& label,
                                           std::optional<Expr>* psi_used) {
  const int dim = model.dim();
  const VectorField f = drift_field(model);
  const int lo_rank = lo.empty() ? 0 : generic_rank(model, lo, cfg);
  const int hi_rank = generic_rank(model, hi, cfg);
  if (hi_rank != lo_rank + 2)
    throw InternalError("splice construction needs a corank-2 inclusion, got " +
                        std::to_string(lo_rank) + " in " + std::to_string(hi_rank));

  // completion pair of lo inside hi
  std::vector<VectorField> pair;
  Distribution acc = lo;
  acc.label = "completion";
  acc.rank_cache.reset();
  acc.involutive_cache.reset();
  for (const VectorField& g : hi.generators) {
    if (pair.size() == 2) break;
    if (!contains(model, acc, g, cfg)) {
      pair.push_back(g);
      acc = with_field(acc, g, "completion");
    }
  }
  if (pair.size() != 2) throw DegeneracyError("could not complete " + lo.label + " inside " + hi.label);

  VectorField direction;
  if (generic_rank(model, closure_hi, cfg) < dim) {
    // unique direction with [v, f] inside the closure
    Codistribution ann = annihilator(model, closure_hi, cfg, "ann(" + closure_hi.label + ")");
    std::vector<std::vector<Expr>> m(ann.generators.size(), std::vector<Expr>(2));
    for (int j = 0; j < 2; ++j) {
      VectorField br = lie_bracket(model, pair[j], f);
      for (std::size_t k = 0; k < ann.generators.size(); ++k)
        m[k][j] = pairing(ann.generators[k], br);
    }
    SampleSpace space = model.sample_space();
    std::vector<std::vector<Expr>> null = symbolic_nullspace(std::move(m), space, cfg);
    if (null.size() != 1)
      throw DegeneracyError("splice direction is not unique (nullspace dimension " +
                            std::to_string(null.size()) + ")");
    direction.comps.assign(dim, Expr::integer(0));
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < dim; ++i)
        direction.comps[i] = direction.comps[i] + null[0][j] * pair[j].comps[i];
    normalize_generator(direction.comps);
    if (psi_used) psi_used->reset();
  } else {
    // full-space case: any psi with d(psi) != 0 annihilating lo
    Codistribution ann = annihilator(model, lo, cfg, "ann(" + lo.label + ")");
    std::optional<Expr> psi;
    for (const OneForm& w : ann.generators) {  // prefer an exact coordinate differential
      int nonzero = -1;
      bool coordinate = true;
      for (int i = 0; i < dim && coordinate; ++i) {
        if (w.comps[i].is_zero_literal()) continue;
        if (nonzero >= 0 || !w.comps[i].is_rational()) coordinate = false;
        nonzero = i;
      }
      if (coordinate && nonzero >= 0) {
        psi = Expr::variable(model.coordinates()[nonzero]);
        break;
      }
    }
    if (!psi) {
      for (const OneForm& w : ann.generators) {
        if (auto p = integrate_one_form(w, model, cfg)) {
          psi = *p;
          break;
        }
      }
    }
    if (!psi)
      throw DegeneracyError("no closed-form function annihilating " + lo.label + " was found");
    if (psi_used) *psi_used = *psi;
    OneForm dpsi = differential(model, *psi);
    Expr c2 = pairing(dpsi, pair[1]);
    Expr c1 = pairing(dpsi, pair[0]);
    direction.comps.assign(dim, Expr::integer(0));
    for (int i = 0; i < dim; ++i)
      direction.comps[i] = c2 * pair[0].comps[i] - c1 * pair[1].comps[i];
    normalize_generator(direction.comps);
    if (direction.structurally_zero())
      throw DegeneracyError("degenerate direction in the full-space splice construction");
  }

  if (contains(model, lo, direction, cfg))
    throw InternalError("splice direction fell inside the lower distribution");
  Distribution out = with_field(lo, direction, label);
  if (!is_involutive(model, out, cfg))
    throw DegeneracyError("constructed splice distribution " + label + " is not involutive");
  if (generic_rank(model, out, cfg) != lo_rank + 1)
    throw InternalError("splice distribution has unexpected rank");
  return out;
}

// ------------------------------------------------------------- extraction

namespace {

struct ResolvedLadder {
  std::vector<Distribution> dists;
  std::vector<int> ranks;
  std::optional<Expr> psi;
};

Distribution resolve_entry(const SystemModel& model, const LadderEntry& e,
                           const SamplingConfig& cfg, std::optional<Expr>* psi) {
  if (!e.missing) return e.dist;
  return complete_missing_distribution(model, e.lo, e.hi, e.closure_hi, cfg, e.name, psi);
}

}  // namespace

FlatOutputCandidate extract_flat_output(const SystemModel& model, const DecisionTrace& trace,
                                        const BranchTrace& branch, const SamplingConfig& cfg) {
  if (!branch.accepted) throw InternalError("flat-output extraction needs an accepted branch");
  const int dim = model.dim();
  const int n = model.n();
  FlatOutputCandidate out;
  out.branch_id = branch.id;
  out.trace_d = trace.d.value_or(0);

  // locate the full-space member
  const std::vector<LadderEntry>& ladder = branch.ladder;
  int full_pos = -1;
  for (std::size_t i = 0; i < ladder.size(); ++i)
    if (!ladder[i].missing && ladder[i].rank == dim) {
      full_pos = static_cast<int>(i);
      break;
    }
  if (full_pos <= 0) throw InternalError("accepted ladder has no full-space member");

  std::optional<Expr> psi;
  Distribution top;
  try {
    top = resolve_entry(model, ladder[full_pos - 1], cfg, &psi);
  } catch (const DegeneracyError& e) {
    // no closed-form splice: the verdict stands, the candidate comes back empty
    out.partial = true;
    out.extraction_note = e.what();
    return out;
  }
  if (psi) out.psi_used = psi;
  const int top_rank = ladder[full_pos - 1].rank;

  SampleSpace space = model.sample_space();
  (void)space;

  auto integrate_pool = [&](const std::vector<OneForm>& forms) {
    // integrate every form we can, building up the partner pool as we go
    std::vector<std::optional<Expr>> result(forms.size());
    std::vector<Partner> pool;
    for (int round = 0; round < 2; ++round) {
      for (std::size_t i = 0; i < forms.size(); ++i) {
        if (result[i]) continue;
        auto phi = integrate_with_partners(model, forms[i], pool, cfg);
        if (phi) {
          result[i] = phi;
          pool.push_back({*phi, differential(model, *phi)});
        }
      }
    }
    return std::make_pair(result, pool);
  };

  if (top_rank == n) {
    out.recipe = FlatOutputCandidate::Recipe::Codim2;
    Codistribution ann = annihilator(model, top, cfg, "ann(" + top.label + ")");
    if (ann.generators.size() != 2)
      throw InternalError("codimension-2 member has annihilator rank != 2");
    out.top_annihilator = ann;
    auto [integrated, pool] = integrate_pool(ann.generators);
    for (std::size_t i = 0; i < ann.generators.size(); ++i) {
      FlatOutputComponent comp;
      comp.form = ann.generators[i];
      if (integrated[i]) {
        comp.closed_form = *integrated[i];
        comp.integrated = true;
      } else {
        out.partial = true;
      }
      out.components.push_back(std::move(comp));
    }
    return out;
  }

  if (top_rank != n + 1)
    throw InternalError("terminal ladder member has unexpected corank");

  // codimension-1 terminal step: phi1 from the top annihilator, then the
  // Lie-derivative chain against the distribution below the +1 run
  out.recipe = FlatOutputCandidate::Recipe::Codim1Chain;
  Codistribution ann_top = annihilator(model, top, cfg, "ann(" + top.label + ")");
  out.top_annihilator = ann_top;
  if (ann_top.generators.size() != 1)
    throw InternalError("codimension-1 member has annihilator rank != 1");

  FlatOutputComponent comp1;
  comp1.form = ann_top.generators[0];
  auto phi1 = integrate_with_partners(model, ann_top.generators[0], {}, cfg);
  if (!phi1) {
    // the chain recipe needs a closed-form phi1; deliver the raw forms
    out.partial = true;
    out.components.push_back(std::move(comp1));
    return out;
  }
  comp1.closed_form = *phi1;
  comp1.integrated = true;

  // walk down the +1 run (ranks of missing entries are known)
  int l_pos = full_pos - 1;
  while (l_pos >= 1 && ladder[l_pos].rank - ladder[l_pos - 1].rank == 1) --l_pos;
  if (l_pos < 1) throw InternalError("codimension-1 run reaches the bottom of the ladder");
  std::optional<Expr> psi2;
  Distribution deep;
  try {
    deep = resolve_entry(model, ladder[l_pos - 1], cfg, &psi2);
  } catch (const DegeneracyError& e) {
    out.partial = true;
    out.extraction_note = e.what();
    out.components.push_back(std::move(comp1));
    return out;
  }
  if (psi2 && !out.psi_used) out.psi_used = psi2;

  Codistribution ann_deep = annihilator(model, deep, cfg, "ann(" + deep.label + ")");
  out.deep_annihilator = ann_deep;
  const int chain_count = dim - ladder[l_pos - 1].rank - 1;
  out.chain_length = chain_count;

  // Lie chain phi1, L_f phi1, ... and its differentials
  const VectorField f = drift_field(model);
  std::vector<OneForm> chain;
  std::vector<Partner> pool;
  Expr g = *phi1;
  for (int t = 0; t < chain_count; ++t) {
    OneForm dg = differential(model, g);
    chain.push_back(dg);
    pool.push_back({g, dg});
    if (t + 1 < chain_count) g = simplify(lie_derivative(model, f, g));
  }

  // partner pool: integrable annihilator generators
  for (const OneForm& w : ann_deep.generators) {
    if (auto p = integrate_with_partners(model, w, {}, cfg)) {
      bool duplicate = false;
      for (const Partner& q : pool)
        if (Expr::equal(q.fn, *p)) duplicate = true;
      if (!duplicate) pool.push_back({*p, differential(model, *p)});
    }
  }

  int chain_rank = form_rank(model, chain, cfg);
  FlatOutputComponent comp2;
  const OneForm* fallback = nullptr;
  for (const OneForm& w : ann_deep.generators) {
    std::vector<OneForm> probe = chain;
    probe.push_back(w);
    if (form_rank(model, probe, cfg) <= chain_rank) continue;  // dependent on the chain
    if (!fallback) fallback = &w;
    if (auto p = integrate_with_partners(model, w, pool, cfg)) {
      // the potential may differ from w by partner differentials; re-check independence
      std::vector<OneForm> check = chain;
      check.push_back(differential(model, *p));
      if (form_rank(model, check, cfg) > chain_rank) {
        comp2.form = w;
        comp2.closed_form = *p;
        comp2.integrated = true;
        break;
      }
    }
  }
  if (!comp2.integrated) {
    if (!fallback)
      throw InternalError("no annihilator generator is independent of the Lie chain");
    comp2.form = *fallback;
    out.partial = true;
  }
  out.components.push_back(std::move(comp1));
  out.components.push_back(std::move(comp2));
  return out;
}

// ------------------------------------------------------- relative degrees

RelativeDegreeReport relative_degrees(const SystemModel& model, const Expr& phi1, const Expr& phi2,
                                      const SamplingConfig& cfg) {
  const SampleSpace space = model.sample_space();
  const VectorField f = drift_field(model);
  auto degree_of = [&](const Expr& phi) {
    Expr cur = simplify(phi);
    for (int k = 0; k <= model.dim() + 2; ++k) {
      bool touches = false;
      for (const std::string& u : model.inputs) {
        Expr du = simplify(differentiate(cur, u));
        if (!du.is_zero_literal() && !is_zero(du, space, cfg)) {
          touches = true;
          break;
        }
      }
      if (touches) return k;
      cur = simplify(lie_derivative(model, f, cur));
    }
    throw DegeneracyError("Lie derivatives of a candidate component never touch the input");
  };
  RelativeDegreeReport rep;
  rep.k1 = degree_of(phi1);
  rep.k2 = degree_of(phi2);
  rep.r1 = model.n() - rep.k2;
  rep.r2 = model.n() - rep.k1;
  rep.d = model.n() - rep.k1 - rep.k2;
  return rep;
}

// ------------------------------------------------------------ verification

VerifyResult verify_flat_output(const SystemModel& model, const FlatOutputCandidate& candidate,
                                const SamplingConfig& cfg) {
  VerifyResult res;
  if (candidate.components.size() != 2 || !candidate.components[0].closed_form ||
      !candidate.components[1].closed_form) {
    res.reason = "candidate has unintegrated components";
    return res;
  }
  const Expr phi1 = *candidate.components[0].closed_form;
  const Expr phi2 = *candidate.components[1].closed_form;
  OneForm d1 = differential(model, phi1);
  OneForm d2 = differential(model, phi2);

  if (candidate.recipe == FlatOutputCandidate::Recipe::Codim2) {
    if (form_rank(model, {d1, d2}, cfg) != 2) {
      res.reason = "component differentials are dependent";
      return res;
    }
    for (const OneForm& d : {d1, d2}) {
      if (!contains_form(model, candidate.top_annihilator, d, cfg)) {
        res.reason = "a differential leaves the terminal annihilator span";
        return res;
      }
    }
  } else {
    if (!contains_form(model, candidate.top_annihilator, d1, cfg)) {
      res.reason = "d(phi1) does not span the terminal annihilator";
      return res;
    }
    if (!candidate.deep_annihilator) {
      res.reason = "missing chain annihilator";
      return res;
    }
    const VectorField f = drift_field(model);
    std::vector<OneForm> chain;
    Expr g = phi1;
    for (int t = 0; t < candidate.chain_length; ++t) {
      chain.push_back(differential(model, g));
      if (t + 1 < candidate.chain_length) g = simplify(lie_derivative(model, f, g));
    }
    std::vector<OneForm> full = chain;
    full.push_back(d2);
    const int deep_rank = generic_rank(model, *candidate.deep_annihilator, cfg);
    if (form_rank(model, full, cfg) != deep_rank) {
      res.reason = "Lie chain plus phi2 does not span the deeper annihilator";
      return res;
    }
    for (const OneForm& w : full) {
      if (!contains_form(model, *candidate.deep_annihilator, w, cfg)) {
        res.reason = "a chain differential leaves the deeper annihilator span";
        return res;
      }
    }
  }

  RelativeDegreeReport rep = relative_degrees(model, phi1, phi2, cfg);
  if (rep.d != candidate.trace_d) {
    res.reason = "relative-degree difference " + std::to_string(rep.d) +
                 " does not match the decided difference " + std::to_string(candidate.trace_d);
    return res;
  }
  res.accepted = true;
  return res;
}

// ------------------------------------------------------ prolongation oracle

Expr derive_prolongation_input(const SystemModel& model, const VectorField& vc,
                               const SamplingConfig& cfg) {
  const int n = model.n();
  for (int i = 0; i < n; ++i)
    if (!vc.comps[i].is_zero_literal())
      throw Error("input derivation supports directions in the input space only");
  OneForm w;
  w.comps.assign(model.dim(), Expr::integer(0));
  w.comps[n] = vc.comps[n + 1];
  w.comps[n + 1] = Expr::neg(vc.comps[n]);
  if (w.structurally_zero()) throw Error("direction has no input components");
  normalize_generator(w.comps);
  auto phi = integrate_one_form(w, model, cfg);
  if (!phi) throw Error("no closed-form input annihilated by the direction was found");
  return *phi;
}

namespace {

std::string fresh_name(const std::string& base, const std::set<std::string>& used) {
  if (!used.count(base)) return base;
  std::string name = base;
  while (used.count(name)) name = "p" + name;
  return name;
}

}  // namespace

OracleResult prolongation_oracle(const SystemModel& model, const Expr& ubar1, int d,
                                 const SamplingConfig& cfg) {
  if (d < 1 || d > 2) throw Error("prolongation order must be 1 or 2");
  {
    std::map<std::string, Kind> syms;
    collect_symbols(ubar1, syms);
    for (const auto& [name, kind] : syms) {
      (void)kind;
      bool known = model.coordinate_index(name) >= 0;
      for (const ConstantDecl& c : model.constants)
        if (c.name == name) known = true;
      if (!known) throw Error("unknown symbol '" + name + "' in the new input expression");
    }
  }
  const SampleSpace space = model.sample_space();
  Expr p[2];
  bool zero[2];
  for (int j = 0; j < 2; ++j) {
    p[j] = simplify(differentiate(ubar1, model.inputs[j]));
    zero[j] = p[j].is_zero_literal() || is_zero(p[j], space, cfg);
  }
  if (zero[0] && zero[1]) throw Error("the new input does not depend on the inputs");

  // complement choice: the coordinate input whose complement minor is
  // generically largest, restricted to affine-solvable choices
  auto median_abs = [&](const Expr& e) {
    if (e.is_zero_literal()) return 0.0;
    std::vector<double> vals;
    Rng rng(cfg.seed);
    for (int s = 0; s < cfg.samples; ++s) {
      for (int retry = 0; retry < cfg.max_eval_retries; ++retry) {
        Point pt = sample_point(space, rng, cfg);
        try {
          vals.push_back(std::abs(evaluate(e, pt)));
          break;
        } catch (const EvalError&) {
        }
      }
    }
    if (vals.empty()) return 0.0;
    std::sort(vals.begin(), vals.end());
    return vals[vals.size() / 2];
  };
  std::vector<int> order = {0, 1};  // candidate index j: keep u_j, solve for the other
  if (median_abs(p[0]) > median_abs(p[1])) order = {1, 0};

  int keep = -1, solve_for = -1;
  Expr A, B;
  for (int j : order) {
    int other = 1 - j;
    if (zero[other]) continue;  // minor vanishes, transformation not regular
    Expr second = simplify(differentiate(p[other], model.inputs[other]));
    if (!second.is_zero_literal() && !is_zero(second, space, cfg)) continue;  // not affine
    keep = j;
    solve_for = other;
    A = p[other];
    B = simplify(ubar1 - A * Expr::variable(model.inputs[other]));
    break;
  }
  if (keep < 0)
    throw Error("no coordinate input complement admits a closed-form inversion of the new input");

  std::set<std::string> used;
  for (const std::string& s : model.states) used.insert(s);
  for (const std::string& u : model.inputs) used.insert(u);
  for (const ConstantDecl& c : model.constants) used.insert(c.name);

  std::vector<std::string> z_names;
  for (int k = 1; k <= d; ++k) {
    std::string name = fresh_name("z" + std::to_string(k), used);
    used.insert(name);
    z_names.push_back(name);
  }
  std::string w_name = fresh_name("w", used);
  used.insert(w_name);

  // u_other = (z1 - B) / A
  std::map<std::string, Expr> subst;
  subst[model.inputs[solve_for]] =
      simplify(Expr::div(Expr::variable(z_names[0]) - B, A));

  OracleResult res;
  res.ubar1 = ubar1;
  res.complement_input = model.inputs[keep];
  SystemModel prolonged;
  prolonged.name = model.name + "-prolonged";
  prolonged.states = model.states;
  for (const std::string& z : z_names) prolonged.states.push_back(z);
  prolonged.inputs = {w_name, model.inputs[keep]};
  prolonged.constants = model.constants;
  for (const Expr& rhs : model.dynamics) prolonged.dynamics.push_back(simplify(substitute(rhs, subst)));
  for (int k = 0; k + 1 < d; ++k)
    prolonged.dynamics.push_back(Expr::variable(z_names[k + 1]));
  prolonged.dynamics.push_back(Expr::variable(w_name));
  for (const Assumption& a : model.assumptions)
    prolonged.assumptions.push_back({simplify(substitute(a.expr, subst)), a.relation});
  Expr a_sub = simplify(substitute(A, subst));
  if (!a_sub.is_rational())
    prolonged.assumptions.push_back({a_sub, Assumption::Relation::NonZero});
  prolonged.validate(cfg);

  res.prolonged = prolonged;
  res.trace = check_sfl(prolonged, cfg);
  res.sfl = res.trace.accepted;
  return res;
}

}  // namespace flatcheck
