#include <doctest.h>

#include "flatcheck/simplify.hpp"
#include "test_helpers.hpp"

// Unit-scale property checks; the full >= 200-case suites run in the
// acceptance binary with the same generators.

using namespace flatcheck;
using namespace flatcheck::testing;

namespace {

bool field_zero_on(const SystemModel& m, const VectorField& v, const SamplingConfig& cfg) {
  for (const Expr& c : v.comps)
    if (!c.is_zero_literal() && !is_zero(c, m.sample_space(), cfg)) return false;
  return true;
}

}  // namespace

TEST_CASE("bracket antisymmetry and Jacobi identity (sampled cases)") {
  SamplingConfig cfg = test_config();
  Rng rng(7);
  SystemModel m = random_system(4, rng);
  m.validate(cfg);
  for (int trial = 0; trial < 12; ++trial) {
    VectorField a = random_field(m, rng);
    VectorField b = random_field(m, rng);
    VectorField ab = lie_bracket(m, a, b);
    VectorField ba = lie_bracket(m, b, a);
    VectorField anti;
    for (int i = 0; i < m.dim(); ++i) anti.comps.push_back(simplify(ab.comps[i] + ba.comps[i]));
    CHECK(field_zero_on(m, anti, cfg));

    VectorField c = random_field(m, rng);
    VectorField jac;
    VectorField t1 = lie_bracket(m, a, lie_bracket(m, b, c));
    VectorField t2 = lie_bracket(m, b, lie_bracket(m, c, a));
    VectorField t3 = lie_bracket(m, c, lie_bracket(m, a, b));
    for (int i = 0; i < m.dim(); ++i)
      jac.comps.push_back(simplify(t1.comps[i] + t2.comps[i] + t3.comps[i]));
    CHECK(field_zero_on(m, jac, cfg));
  }
}

TEST_CASE("closure idempotence and involutivity (sampled cases)") {
  SamplingConfig cfg = test_config();
  Rng rng(11);
  for (int trial = 0; trial < 6; ++trial) {
    SystemModel m = random_system(3 + static_cast<int>(rng.int_in(0, 1)), rng);
    Distribution d = span_of(m, {random_field(m, rng), random_field(m, rng)});
    if (generic_rank(m, d, cfg) == 0) continue;
    Distribution closure = involutive_closure(m, d, cfg, "closure");
    CHECK(is_involutive(m, closure, cfg));
    Distribution twice = involutive_closure(m, closure, cfg, "closure2");
    CHECK(generic_rank(m, twice, cfg) == generic_rank(m, closure, cfg));
  }
}

TEST_CASE("Cauchy characteristics satisfy [c, D] in D (sampled cases)") {
  SamplingConfig cfg = test_config();
  Rng rng(13);
  int done = 0;
  for (int trial = 0; trial < 20 && done < 5; ++trial) {
    SystemModel m = random_system(4, rng);
    Distribution d = span_of(m, {random_field(m, rng), random_field(m, rng),
                                 coordinate_field(m, m.n())});
    int rank = generic_rank(m, d, cfg);
    if (rank < 2 || rank == m.dim()) continue;
    Distribution cc = cauchy_characteristic(m, d, cfg, "C(D)");
    std::vector<VectorField> gens = reduced_generators(m, d, cfg);
    for (const VectorField& c : cc.generators) {
      CHECK(contains(m, d, c, cfg));
      for (const VectorField& g : gens) CHECK(contains(m, d, lie_bracket(m, c, g), cfg));
    }
    if (!is_involutive(m, d, cfg)) {
      // a non-involutive distribution loses at least two directions
      CHECK(static_cast<int>(cc.generators.size()) <= rank - 2);
    }
    ++done;
  }
  CHECK(done > 0);
}

TEST_CASE("annihilator rank complement and pairing (sampled cases)") {
  SamplingConfig cfg = test_config();
  Rng rng(17);
  for (int trial = 0; trial < 6; ++trial) {
    SystemModel m = random_system(3 + static_cast<int>(rng.int_in(0, 2)), rng);
    Distribution d = span_of(m, {random_field(m, rng), random_field(m, rng)});
    int rank = generic_rank(m, d, cfg);
    if (rank == 0) continue;
    Codistribution ann = annihilator(m, d, cfg, "ann");
    CHECK(generic_rank(m, ann, cfg) + rank == m.dim());
    for (const OneForm& w : ann.generators)
      for (const VectorField& g : d.generators)
        CHECK(is_zero(pairing(w, g), m.sample_space(), cfg));
  }
}

TEST_CASE("generic rank is invariant under rescaling and recombination") {
  SamplingConfig cfg = test_config();
  SystemModel m = corpus("vtol");
  BracketSequence seq = build_bracket_sequence(m, cfg);
  const Distribution& d2 = seq.D[2];
  int rank = generic_rank(m, d2, cfg);

  // rescale every generator by a nonvanishing function
  Distribution scaled;
  scaled.label = "scaled";
  Expr factor = E("2 + cos(theta)^2");
  for (const VectorField& g : d2.generators) {
    VectorField s;
    for (const Expr& c : g.comps) s.comps.push_back(simplify(factor * c));
    scaled.generators.push_back(std::move(s));
  }
  CHECK(generic_rank(m, scaled, cfg) == rank);

  // regular recombination: g_i' = g_i + g_{i+1}
  Distribution mixed;
  mixed.label = "mixed";
  for (std::size_t i = 0; i < d2.generators.size(); ++i) {
    const VectorField& a = d2.generators[i];
    const VectorField& b = d2.generators[(i + 1) % d2.generators.size()];
    VectorField s;
    for (int k = 0; k < m.dim(); ++k) s.comps.push_back(simplify(a.comps[k] + b.comps[k]));
    mixed.generators.push_back(std::move(s));
  }
  Distribution both = sum(mixed, d2, "both");
  CHECK(generic_rank(m, both, cfg) == rank);
}

TEST_CASE("algWithin admits at most two solutions (sampled random systems)") {
  SamplingConfig cfg = test_config();
  Rng rng(23);
  int solver_runs = 0;
  for (int trial = 0; trial < 60 && solver_runs < 12; ++trial) {
    SystemModel m = random_system(3 + static_cast<int>(rng.int_in(0, 2)), rng);
    try {
      m.validate(cfg);
      BracketSequence seq = build_bracket_sequence(m, cfg);
      if (!seq.k1) continue;
      int k1 = *seq.k1;
      for (int i = 1; i <= k1; ++i)
        if (seq.dims[i] != 2 * (i + 1)) goto next_trial;
      {
        Distribution lo;
        lo.label = "D_lo";
        if (k1 >= 2) lo = seq.D[k1 - 2];
        std::vector<VectorField> pair;
        Distribution acc = lo;
        for (const VectorField& g : seq.D[k1 - 1].generators) {
          if (pair.size() == 2) break;
          if (!contains(m, acc, g, cfg)) {
            pair.push_back(g);
            acc = with_field(acc, g, "acc");
          }
        }
        if (pair.size() != 2) continue;
        if (subset_of_cauchy(m, seq.D[k1 - 1], seq.D[k1], cfg)) continue;  // 2a shape
        auto sols = solve_alg_within(m, lo, pair[0], pair[1], seq.D[k1], cfg, nullptr);
        CHECK(sols.size() <= 2);
        ++solver_runs;
      }
    } catch (const DegeneracyError&) {
    } catch (const SamplingError&) {
    } catch (const ModelError&) {
    }
  next_trial:;
  }
  CHECK(solver_runs > 0);
}

TEST_CASE("solver results do not depend on the completion pair") {
  SamplingConfig cfg = test_config();
  SystemModel m = corpus("vtol");
  BracketSequence seq = build_bracket_sequence(m, cfg);
  REQUIRE(seq.k1 == 2);
  // provenance completion pair
  std::vector<VectorField> pair;
  Distribution acc = seq.D[0];
  for (const VectorField& g : seq.D[1].generators) {
    if (pair.size() == 2) break;
    if (!contains(m, acc, g, cfg)) {
      pair.push_back(g);
      acc = with_field(acc, g, "acc");
    }
  }
  auto base = solve_alg_within(m, seq.D[0], pair[0], pair[1], seq.D[2], cfg, nullptr);
  REQUIRE(base.size() == 2);

  // regular recombination of the pair: v1' = v1 + v2, v2' = v2 - 2 v1
  VectorField w1, w2;
  for (int i = 0; i < m.dim(); ++i) {
    w1.comps.push_back(simplify(pair[0].comps[i] + pair[1].comps[i]));
    w2.comps.push_back(simplify(pair[1].comps[i] - Expr::integer(2) * pair[0].comps[i]));
  }
  auto alt = solve_alg_within(m, seq.D[0], w1, w2, seq.D[2], cfg, nullptr);
  REQUIRE(alt.size() == 2);
  // the direction sets (mod D_0) coincide
  for (const AlgWithinSolution& s : alt) {
    bool matched = false;
    for (const AlgWithinSolution& b : base) {
      Distribution span = span_of(m, {s.vc, b.vc});
      Distribution joined = sum(sum(seq.D[0], span, "j"), seq.D[0], "j");
      if (generic_rank(m, joined, cfg) == 3) matched = true;  // D_0 + one direction
    }
    CHECK(matched);
  }

  // the splice construction is independent of the completion pair as well
  SystemModel ratio = corpus("sinratio");
  VectorField vc = field(ratio, {{"u1", "u1"}, {"u2", "u2"}});
  VectorField wf = field(ratio, {{"x1", "u1"}, {"x2", "u2"}});
  Distribution e0 = span_of(ratio, {vc}, "E_0");
  Distribution closure = span_of(
      ratio, {coordinate_field(ratio, ratio.coordinate_index("u1")),
              coordinate_field(ratio, ratio.coordinate_index("u2")),
              coordinate_field(ratio, ratio.coordinate_index("x1")),
              coordinate_field(ratio, ratio.coordinate_index("x2"))},
      "closure");
  Distribution e1a = span_of(ratio, {vc, coordinate_field(ratio, ratio.n()), wf}, "E_1");
  // same span, different generator list and order
  VectorField mix1, mix2;
  for (int i = 0; i < ratio.dim(); ++i) {
    mix1.comps.push_back(simplify(wf.comps[i] + vc.comps[i]));
    mix2.comps.push_back(
        simplify(coordinate_field(ratio, ratio.n()).comps[i] - wf.comps[i]));
  }
  Distribution e1b = span_of(ratio, {vc, mix1, mix2}, "E_1");
  std::optional<Expr> psi;
  Distribution f1a = complete_missing_distribution(ratio, e0, e1a, closure, cfg, "F_1", &psi);
  Distribution f1b = complete_missing_distribution(ratio, e0, e1b, closure, cfg, "F_1", &psi);
  CHECK(same_span(ratio, f1a, f1b, cfg));
}

TEST_CASE("verdicts and ranks are invariant under regular input transformations") {
  SamplingConfig cfg = test_config();
  // affine input mix with an invertible rational matrix
  auto transform = [&](const SystemModel& m, const Rat& a, const Rat& b, const Rat& c,
                       const Rat& d, const Expr& shift1, const Expr& shift2) {
    // u = M^{-1} (ubar - shift); here we substitute the old inputs
    Rat det = a * d - b * c;
    REQUIRE_FALSE(det.is_zero());
    Expr ub1 = Expr::variable(m.inputs[0]);
    Expr ub2 = Expr::variable(m.inputs[1]);
    Expr e1 = simplify(Expr::rational(d / det) * (ub1 - shift1) -
                       Expr::rational(b / det) * (ub2 - shift2));
    Expr e2 = simplify(Expr::rational(a / det) * (ub2 - shift2) -
                       Expr::rational(c / det) * (ub1 - shift1));
    std::map<std::string, Expr> bind = {{m.inputs[0], e1}, {m.inputs[1], e2}};
    SystemModel out = m;
    out.name = m.name + "-mixed";
    for (Expr& rhs : out.dynamics) rhs = simplify(substitute(rhs, bind));
    for (Assumption& asm_ : out.assumptions) asm_.expr = simplify(substitute(asm_.expr, bind));
    return out;
  };

  for (const char* name : {"product", "sinratio"}) {
    SystemModel m = corpus(name);
    ClassifyOutcome base = classify(m, 2, cfg);
    SystemModel mixed = transform(m, Rat(2), Rat(1), Rat(1), Rat(1), Expr::variable("x1"),
                                  Expr::integer(0));
    mixed.validate(cfg);
    ClassifyOutcome alt = classify(mixed, 2, cfg);
    CHECK(alt.d == base.d);
    CHECK(alt.verdict == base.verdict);
    REQUIRE(alt.d2.has_value());
    CHECK(alt.d2->k1 == base.d2->k1);
    // the D-ladder ranks coincide
    BracketSequence s1 = build_bracket_sequence(m, cfg);
    BracketSequence s2 = build_bracket_sequence(mixed, cfg);
    CHECK(s1.dims == s2.dims);
  }
}
