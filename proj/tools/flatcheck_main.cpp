#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "flatcheck/modelio.hpp"

namespace {

using namespace flatcheck;

SamplingConfig make_config(std::uint64_t seed, int samples, double tau_zero) {
  SamplingConfig cfg;
  cfg.seed = seed;
  cfg.samples = samples;
  cfg.tau_zero = tau_zero;
  return cfg;
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("FLATCHECK_SEED")) {
    try {
      return std::stoull(env);
    } catch (...) {
      std::cerr << "warning: ignoring malformed FLATCHECK_SEED\n";
    }
  }
  return SamplingConfig{}.seed;
}

ReportInputs gather(const SystemModel& model, const ClassifyOutcome& outcome,
                    const SamplingConfig& cfg, bool flat_outputs) {
  ReportInputs in;
  in.model = &model;
  in.outcome = &outcome;
  in.with_flat_outputs = flat_outputs;
  if (!flat_outputs) return in;
  const DecisionTrace* trace = outcome.accepted_trace();
  if (!trace) return in;
  for (const BranchTrace& branch : trace->branches) {
    if (!branch.accepted) continue;
    FlatOutputCandidate cand = extract_flat_output(model, *trace, branch, cfg);
    if (cand.components.size() == 2 && cand.components[0].closed_form &&
        cand.components[1].closed_form) {
      in.verifications.push_back(verify_flat_output(model, cand, cfg));
      in.degrees.push_back(relative_degrees(model, *cand.components[0].closed_form,
                                            *cand.components[1].closed_form, cfg));
    } else {
      VerifyResult v;
      v.reason = "not attempted (candidate has unintegrated components)";
      in.verifications.push_back(v);
      in.degrees.push_back(std::nullopt);
    }
    in.candidates.push_back(std::move(cand));
  }
  return in;
}

int run_check(const std::string& model_arg, int max_d, const SamplingConfig& cfg,
              const std::string& json_path, bool flat_outputs) {
  SystemModel model = load_model(model_arg);
  model.validate(cfg);
  ClassifyOutcome outcome = classify(model, max_d, cfg);
  ReportInputs in = gather(model, outcome, cfg, flat_outputs);
  std::cout << render_text_report(in, cfg);
  if (!json_path.empty()) {
    Json j = build_report(in, cfg, max_d);
    std::ofstream out(json_path);
    if (!out) {
      std::cerr << "error: cannot write " << json_path << "\n";
      return 1;
    }
    out << j.dump(2) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flatness and feedback-linearizability checks for two-input systems"};
  app.require_subcommand(1);

  std::string model_arg, json_path, input_expr, show_name, export_dir;
  int max_d = 2, prolong_d = 2;
  int samples = SamplingConfig{}.samples;
  double tau_zero = SamplingConfig{}.tau_zero;
  std::uint64_t seed = default_seed();

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "sampling seed (env FLATCHECK_SEED overrides the default)");
    cmd->add_option("--samples", samples, "sample count per probabilistic decision");
    cmd->add_option("--tau-zero", tau_zero, "zero-test tolerance");
  };

  CLI::App* check = app.add_subcommand("check", "classify a model (d = 0, 1 or 2)");
  check->add_option("model", model_arg, "model file or corpus name")->required();
  check->add_option("--max-d", max_d, "largest difference to test (0, 1 or 2)")
      ->check(CLI::Range(0, 2));
  check->add_option("--json", json_path, "write the machine-readable report here");
  add_common(check);

  CLI::App* flat = app.add_subcommand("flat-output", "classify, then extract and verify flat outputs");
  flat->add_option("model", model_arg, "model file or corpus name")->required();
  flat->add_option("--max-d", max_d, "largest difference to test (0, 1 or 2)")
      ->check(CLI::Range(0, 2));
  flat->add_option("--json", json_path, "write the machine-readable report here");
  add_common(flat);

  CLI::App* oracle = app.add_subcommand(
      "oracle", "prolong a new input d times and test static feedback linearizability");
  oracle->add_option("model", model_arg, "model file or corpus name")->required();
  oracle->add_option("--input-expr", input_expr, "the new first input as an expression")
      ->required();
  oracle->add_option("--d", prolong_d, "prolongation order")->check(CLI::Range(1, 2));
  oracle->add_option("--json", json_path, "write the oracle report here");
  add_common(oracle);

  CLI::App* corpus = app.add_subcommand("corpus", "list or export the bundled example models");
  corpus->add_option("--show", show_name, "print one bundled model");
  corpus->add_option("--export", export_dir, "write every bundled model into a directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  SamplingConfig cfg = make_config(seed, samples, tau_zero);
  try {
    if (check->parsed()) return run_check(model_arg, max_d, cfg, json_path, false);
    if (flat->parsed()) return run_check(model_arg, max_d, cfg, json_path, true);
    if (oracle->parsed()) {
      SystemModel model = load_model(model_arg);
      model.validate(cfg);
      Expr ubar1 = resolve_constants(parse_expression(input_expr), model.constants);
      OracleResult res = prolongation_oracle(model, ubar1, prolong_d, cfg);
      std::cout << "new input:        " << res.ubar1.str() << "\n";
      std::cout << "complement input: " << res.complement_input << "\n";
      std::cout << "prolonged system: " << res.prolonged.n() << " states\n";
      std::cout << "verdict:          "
                << (res.sfl ? "static feedback linearizable" : "not static feedback linearizable")
                << "\n";
      if (!json_path.empty()) {
        Json j;
        j["schema"] = "flatcheck-oracle/1";
        j["model"] = model.name;
        j["new_input"] = res.ubar1.str();
        j["complement_input"] = res.complement_input;
        j["prolongation_order"] = prolong_d;
        Json settings;
        settings["seed"] = cfg.seed;
        settings["samples"] = cfg.samples;
        settings["tau_zero"] = cfg.tau_zero;
        j["settings"] = settings;
        j["static_feedback_linearizable"] = res.sfl;
        j["prolonged_model"] = serialize_model(res.prolonged);
        std::ofstream out(json_path);
        if (!out) {
          std::cerr << "error: cannot write " << json_path << "\n";
          return 1;
        }
        out << j.dump(2) << "\n";
      }
      return 0;
    }
    if (corpus->parsed()) {
      if (!show_name.empty()) {
        std::cout << corpus_text(show_name);
        return 0;
      }
      if (!export_dir.empty()) {
        std::filesystem::create_directories(export_dir);
        for (const std::string& name : corpus_names()) {
          std::ofstream out(std::filesystem::path(export_dir) / (name + ".model"));
          out << corpus_text(name);
        }
        std::cout << "wrote " << corpus_names().size() << " models to " << export_dir << "\n";
        return 0;
      }
      for (const std::string& name : corpus_names()) std::cout << name << "\n";
      return 0;
    }
  } catch (const DegeneracyError& e) {
    std::cerr << "degeneracy error: " << e.what() << "\n";
    return 2;
  } catch (const SamplingError& e) {
    std::cerr << "sampling error: " << e.what() << "\n";
    return 2;
  } catch (const ModelError& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
