#include "flatcheck/system.hpp"

#include <algorithm>
#include <set>

#include "flatcheck/errors.hpp"

namespace flatcheck {

std::vector<std::string> SystemModel::coordinates() const {
  std::vector<std::string> out = states;
  out.insert(out.end(), inputs.begin(), inputs.end());
  return out;
}

int SystemModel::coordinate_index(const std::string& name) const {
  for (int i = 0; i < n(); ++i)
    if (states[i] == name) return i;
  for (int j = 0; j < 2; ++j)
    if (inputs[j] == name) return n() + j;
  return -1;
}

SampleSpace SystemModel::sample_space() const {
  SampleSpace space;
  space.symbols = coordinates();
  for (const ConstantDecl& c : constants) {
    if (c.pinned)
      space.pinned[c.name] = *c.pinned;
    else
      space.symbols.push_back(c.name);
  }
  space.assumptions = assumptions;
  return space;
}

void SystemModel::validate(const SamplingConfig& cfg) const {
  if (states.empty()) throw ModelError("model has no states");
  if (inputs.size() != 2) throw ModelError("model must declare exactly two inputs");
  if (dynamics.size() != states.size())
    throw ModelError("dynamics must define one equation per state");

  std::set<std::string> declared;
  for (const std::string& s : states)
    if (!declared.insert(s).second) throw ModelError("duplicate symbol: " + s);
  for (const std::string& u : inputs)
    if (!declared.insert(u).second) throw ModelError("duplicate symbol: " + u);
  for (const ConstantDecl& c : constants)
    if (!declared.insert(c.name).second) throw ModelError("duplicate symbol: " + c.name);

  auto check_symbols = [&](const Expr& e, const std::string& where) {
    std::map<std::string, Kind> syms;
    collect_symbols(e, syms);
    for (const auto& [name, kind] : syms) {
      (void)kind;
      if (!declared.count(name)) throw ModelError("unknown symbol '" + name + "' in " + where);
    }
  };
  for (std::size_t i = 0; i < dynamics.size(); ++i)
    check_symbols(dynamics[i], "dynamics of " + states[i]);
  for (const Assumption& a : assumptions) check_symbols(a.expr, "assumption " + a.str());

  if (input_rank(*this, cfg) != 2)
    throw ModelError("input rank deficiency: rank(df/du) < 2 at generic points");
}

int input_rank(const SystemModel& model, const SamplingConfig& cfg) {
  std::vector<std::vector<Expr>> jac(model.n(), std::vector<Expr>(2));
  for (int i = 0; i < model.n(); ++i)
    for (int j = 0; j < 2; ++j) jac[i][j] = differentiate(model.dynamics[i], model.inputs[j]);

  SampleSpace space = model.sample_space();
  Rng rng(cfg.seed);
  int best = 0;
  for (int s = 0; s < cfg.samples; ++s) {
    for (int retry = 0; retry < cfg.max_eval_retries; ++retry) {
      Point p = sample_point(space, rng, cfg);
      try {
        std::vector<std::vector<double>> m(model.n(), std::vector<double>(2));
        for (int i = 0; i < model.n(); ++i)
          for (int j = 0; j < 2; ++j) m[i][j] = evaluate(jac[i][j], p);
        best = std::max(best, numeric_rank(std::move(m), cfg.rank_tolerance));
        break;
      } catch (const EvalError&) {
      }
    }
    if (best == 2) break;
  }
  return best;
}

}  // namespace flatcheck
