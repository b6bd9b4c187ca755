#include "flatcheck/liealg.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "flatcheck/errors.hpp"
#include "flatcheck/simplify.hpp"

namespace flatcheck {

namespace {

std::string render_combination(const SystemModel& model, const std::vector<Expr>& comps,
                               const std::string& prefix) {
  std::vector<std::string> coords = model.coordinates();
  std::ostringstream os;
  bool first = true;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    if (comps[i].is_zero_literal()) continue;
    Expr c = comps[i];
    bool negative = false;
    if (c.kind() == Kind::Neg) {
      negative = true;
      c = c.kids()[0];
    } else if (c.is_rational() && c.value().is_negative()) {
      negative = true;
      c = Expr::rational(-c.value());
    } else if (c.kind() == Kind::Mul && c.kids()[0].is_rational() &&
               c.kids()[0].value().is_negative()) {
      std::vector<Expr> ks = c.kids();
      ks[0] = Expr::rational(-ks[0].value());
      negative = true;
      c = Expr::mul(std::move(ks));
    }
    if (first) {
      if (negative) os << '-';
      first = false;
    } else {
      os << (negative ? " - " : " + ");
    }
    if (!c.is_one_literal()) {
      bool wrap = c.kind() == Kind::Add;
      if (wrap) os << '(';
      os << c.str();
      if (wrap) os << ')';
      os << '*';
    }
    os << prefix << coords[i];
  }
  if (first) return "0";
  return os.str();
}

}  // namespace

bool VectorField::structurally_zero() const {
  for (const Expr& c : comps)
    if (!c.is_zero_literal()) return false;
  return true;
}

std::string VectorField::str(const SystemModel& model) const {
  return render_combination(model, comps, "d_");
}

bool OneForm::structurally_zero() const {
  for (const Expr& c : comps)
    if (!c.is_zero_literal()) return false;
  return true;
}

std::string OneForm::str(const SystemModel& model) const {
  return render_combination(model, comps, "d");
}

VectorField drift_field(const SystemModel& model) {
  VectorField f;
  f.comps = model.dynamics;
  f.comps.push_back(Expr::integer(0));
  f.comps.push_back(Expr::integer(0));
  return f;
}

VectorField coordinate_field(const SystemModel& model, int index) {
  VectorField v;
  v.comps.assign(model.dim(), Expr::integer(0));
  v.comps[index] = Expr::integer(1);
  return v;
}

VectorField zero_field(const SystemModel& model) {
  VectorField v;
  v.comps.assign(model.dim(), Expr::integer(0));
  return v;
}

Distribution input_distribution(const SystemModel& model) {
  Distribution d;
  d.label = "D_0";
  d.generators = {coordinate_field(model, model.n()), coordinate_field(model, model.n() + 1)};
  d.rank_cache = 2;
  d.involutive_cache = true;
  return d;
}

Distribution full_tangent_space(const SystemModel& model) {
  Distribution d;
  d.label = "TXU";
  for (int i = 0; i < model.dim(); ++i) d.generators.push_back(coordinate_field(model, i));
  d.rank_cache = model.dim();
  d.involutive_cache = true;
  return d;
}

Expr pairing(const OneForm& w, const VectorField& v) {
  std::vector<Expr> terms;
  for (std::size_t i = 0; i < w.comps.size(); ++i) terms.push_back(w.comps[i] * v.comps[i]);
  return simplify(Expr::add(std::move(terms)));
}

OneForm differential(const SystemModel& model, const Expr& fn) {
  OneForm w;
  for (const std::string& coord : model.coordinates())
    w.comps.push_back(simplify(differentiate(fn, coord)));
  return w;
}

Expr lie_derivative(const SystemModel& model, const VectorField& v, const Expr& fn) {
  std::vector<Expr> terms;
  std::vector<std::string> coords = model.coordinates();
  for (int i = 0; i < model.dim(); ++i) {
    if (v.comps[i].is_zero_literal()) continue;
    terms.push_back(v.comps[i] * differentiate(fn, coords[i]));
  }
  return simplify(Expr::add(std::move(terms)));
}

VectorField lie_bracket(const SystemModel& model, const VectorField& v, const VectorField& w) {
  std::vector<std::string> coords = model.coordinates();
  const int dim = model.dim();
  VectorField out;
  out.comps.reserve(dim);
  for (int i = 0; i < dim; ++i) {
    std::vector<Expr> terms;
    for (int j = 0; j < dim; ++j) {
      if (!v.comps[j].is_zero_literal() && !w.comps[i].is_rational())
        terms.push_back(v.comps[j] * differentiate(w.comps[i], coords[j]));
      if (!w.comps[j].is_zero_literal() && !v.comps[i].is_rational())
        terms.push_back(Expr::neg(w.comps[j] * differentiate(v.comps[i], coords[j])));
    }
    out.comps.push_back(simplify(Expr::add(std::move(terms))));
  }
  return out;
}

VectorField ad_iterate(const SystemModel& model, const VectorField& f, const VectorField& v,
                       int k) {
  VectorField out = v;
  for (int i = 0; i < k; ++i) out = lie_bracket(model, f, out);
  return out;
}

// ------------------------------------------------------------------ ranks

namespace {

/// Evaluates the columns at sampled points and reports the numeric rank per
/// sample; degeneracy when the median disagrees with the max.
int sampled_rank(const SystemModel& model, const std::vector<const std::vector<Expr>*>& columns,
                 const SamplingConfig& cfg, const std::string& what) {
  if (columns.empty()) return 0;
  SampleSpace space = model.sample_space();
  Rng rng(cfg.seed);
  std::vector<int> ranks;
  ranks.reserve(cfg.samples);
  for (int s = 0; s < cfg.samples; ++s) {
    bool done = false;
    for (int retry = 0; retry < cfg.max_eval_retries && !done; ++retry) {
      Point p = sample_point(space, rng, cfg);
      try {
        std::vector<std::vector<double>> m(columns[0]->size(),
                                           std::vector<double>(columns.size()));
        for (std::size_t c = 0; c < columns.size(); ++c)
          for (std::size_t r = 0; r < columns[c]->size(); ++r)
            m[r][c] = evaluate((*columns[c])[r], p);
        // rank is invariant under rescaling generators; shrinking oversized
        // columns keeps one ill-scaled generator from drowning out the
        // others. Columns are never scaled up: amplifying one that is zero
        // up to roundoff would turn noise into a spurious direction.
        for (std::size_t c = 0; c < columns.size(); ++c) {
          double scale = 1.0;
          for (std::size_t r = 0; r < m.size(); ++r) scale = std::max(scale, std::abs(m[r][c]));
          for (std::size_t r = 0; r < m.size(); ++r) m[r][c] /= scale;
        }
        ranks.push_back(numeric_rank(std::move(m), cfg.rank_tolerance));
        done = true;
      } catch (const EvalError&) {
      }
    }
    if (!done) throw SamplingError("rank sampling failed for " + what);
  }
  std::vector<int> sorted = ranks;
  std::sort(sorted.begin(), sorted.end());
  int max = sorted.back();
  int median = sorted[sorted.size() / 2];
  if (median != max)
    throw DegeneracyError("rank of " + what +
                          " is not locally constant across samples (median " +
                          std::to_string(median) + " vs max " + std::to_string(max) + ")");
  return max;
}

std::vector<const std::vector<Expr>*> field_columns(const std::vector<VectorField>& gens) {
  std::vector<const std::vector<Expr>*> cols;
  cols.reserve(gens.size());
  for (const VectorField& g : gens) cols.push_back(&g.comps);
  return cols;
}

std::vector<const std::vector<Expr>*> form_columns(const std::vector<OneForm>& gens) {
  std::vector<const std::vector<Expr>*> cols;
  cols.reserve(gens.size());
  for (const OneForm& g : gens) cols.push_back(&g.comps);
  return cols;
}

}  // namespace

int generic_rank(const SystemModel& model, const Distribution& D, const SamplingConfig& cfg) {
  if (D.rank_cache) return *D.rank_cache;
  int r = sampled_rank(model, field_columns(D.generators), cfg,
                       D.label.empty() ? "distribution" : D.label);
  D.rank_cache = r;
  return r;
}

int generic_rank(const SystemModel& model, const Codistribution& W, const SamplingConfig& cfg) {
  if (W.rank_cache) return *W.rank_cache;
  int r = sampled_rank(model, form_columns(W.generators), cfg,
                       W.label.empty() ? "codistribution" : W.label);
  W.rank_cache = r;
  return r;
}

bool contains(const SystemModel& model, const Distribution& D, const VectorField& v,
              const SamplingConfig& cfg) {
  if (v.structurally_zero()) return true;
  if (D.empty()) return false;
  int base = generic_rank(model, D, cfg);
  if (base == model.dim()) return true;
  Distribution ext = D;
  ext.label = D.label + "+v";
  ext.rank_cache.reset();
  ext.involutive_cache.reset();
  ext.generators.push_back(v);
  return generic_rank(model, ext, cfg) == base;
}

bool contains_form(const SystemModel& model, const Codistribution& W, const OneForm& w,
                   const SamplingConfig& cfg) {
  if (w.structurally_zero()) return true;
  if (W.generators.empty()) return false;
  int base = generic_rank(model, W, cfg);
  Codistribution ext = W;
  ext.label = W.label + "+w";
  ext.rank_cache.reset();
  ext.generators.push_back(w);
  return generic_rank(model, ext, cfg) == base;
}

std::vector<VectorField> reduced_generators(const SystemModel& model, const Distribution& D,
                                            const SamplingConfig& cfg) {
  std::vector<VectorField> kept;
  Distribution acc;
  acc.label = D.label + "|reduced";
  int rank = 0;
  int target = generic_rank(model, D, cfg);
  for (const VectorField& g : D.generators) {
    if (rank == target) break;
    if (g.structurally_zero()) continue;
    Distribution trial = acc;
    trial.rank_cache.reset();
    trial.generators.push_back(g);
    int r = sampled_rank(model, field_columns(trial.generators), cfg, acc.label);
    if (r > rank) {
      rank = r;
      acc = trial;
      kept.push_back(g);
    }
  }
  if (rank != target)
    throw DegeneracyError("generator reduction lost rank for " + D.label);
  return kept;
}

bool is_involutive(const SystemModel& model, const Distribution& D, const SamplingConfig& cfg) {
  if (D.involutive_cache) return *D.involutive_cache;
  bool result = true;
  if (generic_rank(model, D, cfg) < model.dim()) {
    std::vector<VectorField> gens = reduced_generators(model, D, cfg);
    for (std::size_t i = 0; i < gens.size() && result; ++i)
      for (std::size_t j = i + 1; j < gens.size() && result; ++j) {
        VectorField br = lie_bracket(model, gens[i], gens[j]);
        if (!contains(model, D, br, cfg)) result = false;
      }
  }
  D.involutive_cache = result;
  return result;
}

bool subset_of_cauchy(const SystemModel& model, const Distribution& A, const Distribution& D,
                      const SamplingConfig& cfg) {
  std::vector<VectorField> a_gens = A.empty() ? std::vector<VectorField>{}
                                              : reduced_generators(model, A, cfg);
  std::vector<VectorField> d_gens = reduced_generators(model, D, cfg);
  for (const VectorField& a : a_gens) {
    if (!contains(model, D, a, cfg)) return false;
    for (const VectorField& g : d_gens) {
      VectorField br = lie_bracket(model, a, g);
      if (!contains(model, D, br, cfg)) return false;
    }
  }
  return true;
}

Distribution sum(const Distribution& a, const Distribution& b, const std::string& label) {
  Distribution out;
  out.label = label;
  out.generators = a.generators;
  out.generators.insert(out.generators.end(), b.generators.begin(), b.generators.end());
  return out;
}

Distribution with_field(const Distribution& a, const VectorField& v, const std::string& label) {
  Distribution out;
  out.label = label;
  out.generators = a.generators;
  out.generators.push_back(v);
  return out;
}

Distribution bracket_with(const SystemModel& model, const VectorField& f, const Distribution& D,
                          const std::string& label) {
  Distribution out;
  out.label = label;
  for (const VectorField& g : D.generators) out.generators.push_back(lie_bracket(model, f, g));
  return out;
}

Distribution involutive_closure(const SystemModel& model, const Distribution& D,
                                const SamplingConfig& cfg, const std::string& label) {
  Distribution acc;
  acc.label = label;
  acc.generators = reduced_generators(model, D, cfg);
  int rank = generic_rank(model, acc, cfg);
  const int dim = model.dim();
  while (rank < dim) {
    std::vector<VectorField> gens = reduced_generators(model, acc, cfg);
    bool grew = false;
    for (std::size_t i = 0; i < gens.size(); ++i) {
      for (std::size_t j = i + 1; j < gens.size(); ++j) {
        VectorField br = lie_bracket(model, gens[i], gens[j]);
        if (!contains(model, acc, br, cfg)) {
          acc.generators.push_back(br);
          acc.rank_cache.reset();
          acc.involutive_cache.reset();
          ++rank;
          acc.rank_cache = rank;
          grew = true;
          if (rank == dim) break;
        }
      }
      if (rank == dim) break;
    }
    if (!grew) break;
  }
  acc.involutive_cache = true;  // saturated by construction
  return acc;
}

Distribution derived_flag(const SystemModel& model, const Distribution& D,
                          const SamplingConfig& cfg, const std::string& label) {
  Distribution out;
  out.label = label;
  out.generators = reduced_generators(model, D, cfg);
  std::vector<VectorField> gens = out.generators;
  int rank = generic_rank(model, D, cfg);
  out.rank_cache = rank;
  for (std::size_t i = 0; i < gens.size(); ++i)
    for (std::size_t j = i + 1; j < gens.size(); ++j) {
      VectorField br = lie_bracket(model, gens[i], gens[j]);
      if (!contains(model, out, br, cfg)) {
        out.generators.push_back(br);
        out.rank_cache = *out.rank_cache + 1;
      }
    }
  return out;
}

// ------------------------------------------------ symbolic elimination

namespace {

bool entry_zero(const Expr& e, const SampleSpace& space, const SamplingConfig& cfg) {
  if (e.is_zero_literal()) return true;
  return is_zero(e, space, cfg);
}

struct Elimination {
  std::vector<std::vector<Expr>> m;  // Gauss-Jordan reduced
  std::vector<std::pair<int, int>> pivots;  // (row, col)
  std::vector<bool> row_used, col_used;
};

Elimination eliminate(std::vector<std::vector<Expr>> m, const SampleSpace& space,
                      const SamplingConfig& cfg) {
  Elimination el;
  const int rows = static_cast<int>(m.size());
  const int cols = rows == 0 ? 0 : static_cast<int>(m[0].size());
  el.row_used.assign(rows, false);
  el.col_used.assign(cols, false);
  while (true) {
    // candidate pivots ordered by node count, then position
    int pr = -1, pc = -1;
    std::size_t best_size = SIZE_MAX;
    for (int r = 0; r < rows; ++r) {
      if (el.row_used[r]) continue;
      for (int c = 0; c < cols; ++c) {
        if (el.col_used[c] || m[r][c].is_zero_literal()) continue;
        if (m[r][c].size() < best_size) {
          // defer the probabilistic zero test until a candidate is chosen
          best_size = m[r][c].size();
          pr = r;
          pc = c;
        }
      }
    }
    if (pr < 0) break;
    if (entry_zero(m[pr][pc], space, cfg)) {
      m[pr][pc] = Expr::integer(0);
      continue;
    }
    el.row_used[pr] = true;
    el.col_used[pc] = true;
    el.pivots.emplace_back(pr, pc);
    const Expr pivot = m[pr][pc];
    for (int r = 0; r < rows; ++r) {
      if (r == pr || m[r][pc].is_zero_literal()) continue;
      const Expr factor = m[r][pc];
      for (int c = 0; c < cols; ++c) {
        if (c == pc) {
          m[r][c] = Expr::integer(0);
          continue;
        }
        m[r][c] = simplify(pivot * m[r][c] - factor * m[pr][c]);
      }
    }
  }
  el.m = std::move(m);
  return el;
}

}  // namespace

std::vector<std::vector<Expr>> symbolic_nullspace(std::vector<std::vector<Expr>> m,
                                                  const SampleSpace& space,
                                                  const SamplingConfig& cfg) {
  const int rows = static_cast<int>(m.size());
  const int cols = rows == 0 ? 0 : static_cast<int>(m[0].size());
  std::vector<std::vector<Expr>> original = m;
  for (auto& row : m)
    for (Expr& e : row) e = simplify(e);
  Elimination el = eliminate(std::move(m), space, cfg);

  std::vector<std::vector<Expr>> basis;
  for (int cf = 0; cf < cols; ++cf) {
    if (el.col_used[cf]) continue;
    std::vector<Expr> v(cols, Expr::integer(0));
    v[cf] = Expr::integer(1);
    for (const auto& [pr, pc] : el.pivots)
      v[pc] = simplify(Expr::div(Expr::neg(el.m[pr][cf]), el.m[pr][pc]));
    normalize_generator(v);
    basis.push_back(std::move(v));
  }

  // verify the basis against the original matrix (guards false-zero pivots)
  for (const auto& v : basis) {
    for (int r = 0; r < rows; ++r) {
      std::vector<Expr> terms;
      for (int c = 0; c < cols; ++c) terms.push_back(original[r][c] * v[c]);
      if (!entry_zero(simplify(Expr::add(std::move(terms))), space, cfg))
        throw DegeneracyError("symbolic nullspace verification failed");
    }
  }
  return basis;
}

std::optional<std::vector<Expr>> solve_linear(const std::vector<std::vector<Expr>>& m,
                                              const std::vector<Expr>& rhs,
                                              const SampleSpace& space,
                                              const SamplingConfig& cfg) {
  const int rows = static_cast<int>(m.size());
  const int cols = rows == 0 ? 0 : static_cast<int>(m[0].size());
  // augment [M | rhs] and eliminate on the M columns only
  std::vector<std::vector<Expr>> aug(rows);
  for (int r = 0; r < rows; ++r) {
    aug[r] = m[r];
    for (Expr& e : aug[r]) e = simplify(e);
    aug[r].push_back(simplify(rhs[r]));
  }
  // temporarily mark the rhs column used so pivots stay within M
  Elimination el;
  {
    std::vector<std::vector<Expr>> work = aug;
    const int wcols = cols + 1;
    el.row_used.assign(rows, false);
    el.col_used.assign(wcols, false);
    el.col_used[cols] = true;
    while (true) {
      int pr = -1, pc = -1;
      std::size_t best_size = SIZE_MAX;
      for (int r = 0; r < rows; ++r) {
        if (el.row_used[r]) continue;
        for (int c = 0; c < cols; ++c) {
          if (el.col_used[c] || work[r][c].is_zero_literal()) continue;
          if (work[r][c].size() < best_size) {
            best_size = work[r][c].size();
            pr = r;
            pc = c;
          }
        }
      }
      if (pr < 0) break;
      if (entry_zero(work[pr][pc], space, cfg)) {
        work[pr][pc] = Expr::integer(0);
        continue;
      }
      el.row_used[pr] = true;
      el.col_used[pc] = true;
      el.pivots.emplace_back(pr, pc);
      const Expr pivot = work[pr][pc];
      for (int r = 0; r < rows; ++r) {
        if (r == pr || work[r][pc].is_zero_literal()) continue;
        const Expr factor = work[r][pc];
        for (int c = 0; c < wcols; ++c) {
          if (c == pc) {
            work[r][c] = Expr::integer(0);
            continue;
          }
          work[r][c] = simplify(pivot * work[r][c] - factor * work[pr][c]);
        }
      }
    }
    el.m = std::move(work);
  }
  // consistency: rows without pivots must have zero rhs
  for (int r = 0; r < rows; ++r) {
    if (el.row_used[r]) continue;
    if (!entry_zero(el.m[r][cols], space, cfg)) return std::nullopt;
  }
  std::vector<Expr> x(cols, Expr::integer(0));
  for (const auto& [pr, pc] : el.pivots)
    x[pc] = simplify(Expr::div(el.m[pr][cols], el.m[pr][pc]));
  // verify
  for (int r = 0; r < rows; ++r) {
    std::vector<Expr> terms;
    for (int c = 0; c < cols; ++c) terms.push_back(m[r][c] * x[c]);
    terms.push_back(Expr::neg(rhs[r]));
    if (!entry_zero(simplify(Expr::add(std::move(terms))), space, cfg)) return std::nullopt;
  }
  return x;
}

void normalize_generator(std::vector<Expr>& comps) {
  using detail::decompose;
  using detail::Factors;
  using detail::rebuild;
  std::vector<Factors> decomps;
  std::vector<int> nonzero;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    comps[i] = simplify(comps[i]);
    if (!comps[i].is_zero_literal()) {
      decomps.push_back(decompose(comps[i]));
      nonzero.push_back(static_cast<int>(i));
    }
  }
  if (nonzero.empty()) return;

  // least common multiple of the denominators (factor-wise)
  Factors lcm;
  std::int64_t den_lcm = 1;
  for (const Factors& f : decomps) {
    den_lcm = std::lcm(den_lcm, f.coeff.den());
    for (const auto& [base, power] : f.powers) {
      if (power >= 0) continue;
      int need = -power;
      auto it = std::lower_bound(
          lcm.powers.begin(), lcm.powers.end(), base,
          [](const auto& p, const Expr& b) { return Expr::compare(p.first, b) < 0; });
      if (it != lcm.powers.end() && Expr::compare(it->first, base) == 0)
        it->second = std::max(it->second, need);
      else
        lcm.powers.insert(it, {base, need});
    }
  }
  for (Factors& f : decomps) {
    f.coeff = f.coeff * Rat(den_lcm);
    for (const auto& [base, power] : lcm.powers) f.merge(base, power);
  }

  // common content: gcd of coefficients, factor-wise min of powers
  std::int64_t num_gcd = 0;
  for (const Factors& f : decomps) num_gcd = std::gcd(num_gcd, f.coeff.num());
  if (num_gcd == 0) num_gcd = 1;
  Factors content = decomps[0];
  content.coeff = Rat(1);
  for (std::size_t k = 1; k < decomps.size(); ++k) {
    Factors next;
    for (const auto& [base, power] : content.powers) {
      if (power <= 0) continue;
      for (const auto& [base2, power2] : decomps[k].powers) {
        if (power2 > 0 && Expr::compare(base, base2) == 0) {
          next.merge(base, std::min(power, power2));
          break;
        }
      }
    }
    content = std::move(next);
  }
  bool flip = decomps[0].coeff.is_negative();
  for (std::size_t k = 0; k < decomps.size(); ++k) {
    Factors f = decomps[k];
    f.coeff = f.coeff / Rat(num_gcd);
    if (flip) f.coeff = -f.coeff;
    for (const auto& [base, power] : content.powers) f.merge(base, -power);
    comps[nonzero[k]] = simplify(rebuild(f));
  }
}

Distribution cauchy_characteristic(const SystemModel& model, const Distribution& D,
                                   const SamplingConfig& cfg, const std::string& label) {
  Distribution out;
  out.label = label;
  if (D.empty()) {
    out.rank_cache = 0;
    return out;
  }
  if (generic_rank(model, D, cfg) == model.dim()) {
    out = full_tangent_space(model);
    out.label = label;
    return out;
  }
  std::vector<VectorField> gens = reduced_generators(model, D, cfg);
  Distribution reduced;
  reduced.label = D.label;
  reduced.generators = gens;
  Codistribution ann = annihilator(model, reduced, cfg, "ann(" + D.label + ")");

  // c = sum_i gamma_i g_i is characteristic iff for every generator g_j and
  // annihilator form w_k:  sum_i gamma_i <w_k, [g_i, g_j]> = 0.
  const int g = static_cast<int>(gens.size());
  std::vector<std::vector<Expr>> rows;
  for (int j = 0; j < g; ++j) {
    std::vector<VectorField> brackets;
    brackets.reserve(g);
    for (int i = 0; i < g; ++i) brackets.push_back(lie_bracket(model, gens[i], gens[j]));
    for (const OneForm& w : ann.generators) {
      std::vector<Expr> row(g);
      bool all_zero = true;
      for (int i = 0; i < g; ++i) {
        row[i] = pairing(w, brackets[i]);
        if (!row[i].is_zero_literal()) all_zero = false;
      }
      if (!all_zero) rows.push_back(std::move(row));
    }
  }
  if (rows.empty()) {
    // involutive: C(D) = D
    out.generators = gens;
    return out;
  }
  SampleSpace space = model.sample_space();
  std::vector<std::vector<Expr>> gammas = symbolic_nullspace(std::move(rows), space, cfg);
  for (const auto& gamma : gammas) {
    VectorField c;
    c.comps.assign(model.dim(), Expr::integer(0));
    for (int i = 0; i < g; ++i) {
      if (gamma[i].is_zero_literal()) continue;
      for (int k = 0; k < model.dim(); ++k)
        c.comps[k] = c.comps[k] + gamma[i] * gens[i].comps[k];
    }
    normalize_generator(c.comps);
    out.generators.push_back(std::move(c));
  }
  return out;
}

Codistribution annihilator(const SystemModel& model, const Distribution& D,
                           const SamplingConfig& cfg, const std::string& label) {
  Codistribution out;
  out.label = label;
  std::vector<VectorField> gens =
      D.empty() ? std::vector<VectorField>{} : reduced_generators(model, D, cfg);
  if (gens.empty()) {
    for (int i = 0; i < model.dim(); ++i) {
      OneForm w;
      w.comps.assign(model.dim(), Expr::integer(0));
      w.comps[i] = Expr::integer(1);
      out.generators.push_back(std::move(w));
    }
    out.rank_cache = model.dim();
    return out;
  }
  std::vector<std::vector<Expr>> rows;
  rows.reserve(gens.size());
  for (const VectorField& g : gens) rows.push_back(g.comps);
  SampleSpace space = model.sample_space();
  std::vector<std::vector<Expr>> basis = symbolic_nullspace(std::move(rows), space, cfg);
  for (auto& b : basis) {
    OneForm w;
    w.comps = std::move(b);
    out.generators.push_back(std::move(w));
  }
  out.rank_cache = static_cast<int>(out.generators.size());
  return out;
}

}  // namespace flatcheck
