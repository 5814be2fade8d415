#include <cstdio>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "conformal/conformal.hpp"
#include "conformal/evaluate.hpp"

namespace {

struct CliState {
  conformal::RunConfig cfg;
  std::string score = "l2";
  std::string s_type = "st-dev";
  std::string output;
  std::string plot_path;
  bool evaluate = false;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* seed_rand_opt = nullptr;
};

void add_common_options(CLI::App* cmd, CliState& st, bool fd_mode) {
  cmd->add_option("--input", st.cfg.input, "input data file")->required();
  cmd->add_option("--output", st.output, "result document path (default: stdout)");
  cmd->add_option("--plot", st.plot_path, "SVG plot path");
  cmd->add_option("--alpha", st.cfg.alpha, "miscoverage level in (0,1)")->capture_default_str();
  cmd->add_option("--model", st.cfg.model,
                  fd_mode ? "regression model (mean|concurrent)"
                          : "regression model (mean|ols|ridge)")
      ->capture_default_str();
  cmd->add_option("--ridge-lambda", st.cfg.ridge_lambda, "ridge penalty")->capture_default_str();
  cmd->add_option("--threads", st.cfg.threads, "worker threads (0 = all cores)")
      ->capture_default_str();
  cmd->add_flag("--verbose", st.cfg.verbose, "print progress to stderr");
  if (!fd_mode)
    cmd->add_option("--response-cols", st.cfg.response_cols,
                    "comma-separated response column names")
        ->required();
}

void add_score_options(CLI::App* cmd, CliState& st, bool with_alpha_max, bool fd_mode) {
  if (!fd_mode)
    cmd->add_option("--score", st.score, "nonconformity score (l2|mahalanobis|max)")
        ->check(CLI::IsMember({"l2", "mahalanobis", "max"}))
        ->capture_default_str();
  auto* opt =
      cmd->add_option("--s-type", st.s_type, "residual modulation")->capture_default_str();
  if (with_alpha_max)
    opt->check(CLI::IsMember({"identity", "st-dev", "alpha-max"}));
  else
    opt->check(CLI::IsMember({"identity", "st-dev"}));
}

void add_split_options(CLI::App* cmd, CliState& st) {
  st.seed_opt = cmd->add_option("--seed", st.cfg.seed, "seed for the splitting RNG");
  cmd->add_option("--rho", st.cfg.rho, "train fraction(s) of the split")->expected(-1);
  cmd->add_flag("--randomized", st.cfg.randomized, "smoothed (tie-randomized) variant");
  st.seed_rand_opt = cmd->add_option("--seed-rand", st.cfg.seed_rand,
                                     "seed for the smoothing draw");
}

int execute(CliState& st) {
  using namespace conformal;
  if (st.cfg.threads == 0) st.cfg.threads = hardware_threads();
  st.cfg.score = parse_score(st.score);
  st.cfg.s_type = parse_s_type(st.s_type);
  // Unseeded invocations still echo the concrete seeds they used, so any run
  // can be reproduced from its own output.
  if (st.seed_opt && st.seed_opt->count() == 0) st.cfg.seed = std::random_device{}();
  if (st.cfg.randomized && st.seed_rand_opt && st.seed_rand_opt->count() == 0)
    st.cfg.seed_rand = std::random_device{}();

  if (st.cfg.verbose)
    std::cerr << "conformal: " << (st.evaluate ? "evaluate " : "") << st.cfg.mode << " "
              << st.cfg.method << " on '" << st.cfg.input << "', alpha=" << st.cfg.alpha
              << ", seed=" << st.cfg.seed << "\n";

  if (st.evaluate) {
    const EvalReport report = evaluate(st.cfg);
    const json doc = eval_to_json(st.cfg, report);
    if (!st.output.empty())
      write_document(doc, st.output);
    else
      std::cout << doc.dump() << "\n";
    std::fprintf(stderr,
                 "evaluate %s/%s: coverage %.4f, avg size %.6g, avg time %.6g s (%zu folds)\n",
                 st.cfg.mode.c_str(), st.cfg.method.c_str(), report.coverage, report.avg_size,
                 report.avg_time_sec, report.folds);
    return 0;
  }

  const json doc = run(st.cfg);
  if (!st.output.empty())
    write_document(doc, st.output);
  else
    std::cout << doc.dump() << "\n";
  if (!st.plot_path.empty()) plot(doc, st.plot_path);
  if (st.cfg.verbose) std::cerr << "conformal: done\n";
  return 0;
}

// One leaf subcommand per (mode, method); each owns its state so defaults
// never leak between methods.
void add_method_tree(CLI::App* parent, std::vector<std::unique_ptr<CliState>>& states,
                     CliState** selected, bool evaluate) {
  for (const std::string mode : {"multi", "fd"}) {
    auto* mode_cmd = parent->add_subcommand(
        mode, mode == "multi" ? "multivariate responses" : "functional responses");
    mode_cmd->require_subcommand(1);
    const bool fd = mode == "fd";
    const std::vector<std::string> methods =
        fd ? std::vector<std::string>{"split", "msplit", "jackplus"}
           : std::vector<std::string>{"full", "split", "msplit", "jackplus"};
    for (const auto& method : methods) {
      states.push_back(std::make_unique<CliState>());
      CliState& st = *states.back();
      st.cfg.mode = mode;
      st.cfg.method = method;
      st.cfg.model = fd ? "concurrent" : "ols";
      st.cfg.threads = 0;  // all cores unless --threads says otherwise
      st.score = (!fd && method == "msplit") ? "max" : "l2";
      st.evaluate = evaluate;

      auto* cmd = mode_cmd->add_subcommand(method, method + " conformal prediction");
      add_common_options(cmd, st, fd);
      if (method == "full") {
        add_score_options(cmd, st, false, fd);
        cmd->add_option("--grid-pts", st.cfg.grid_pts, "candidate grid points per dimension")
            ->capture_default_str();
        cmd->add_option("--grid-factor", st.cfg.grid_factor, "grid half-width factor")
            ->capture_default_str();
      } else if (method == "split") {
        add_score_options(cmd, st, true, fd);
        add_split_options(cmd, st);
      } else if (method == "msplit") {
        add_score_options(cmd, st, true, fd);
        add_split_options(cmd, st);
        cmd->add_option("--B", st.cfg.B, fd ? "split replicates (default 50)"
                                            : "split replicates (default 100)");
        cmd->add_option("--tau", st.cfg.tau,
                        fd ? "joining fraction (default 0.5)" : "joining fraction (default 0.1)");
        cmd->add_option("--lambda", st.cfg.lambda, "inner-level smoothing integer");
      }
      cmd->callback([&st, selected] { *selected = &st; });
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conformal prediction regions for multivariate and functional regression"};
  app.require_subcommand(1);

  std::vector<std::unique_ptr<CliState>> states;
  CliState* selected = nullptr;
  add_method_tree(&app, states, &selected, false);
  auto* eval_cmd = app.add_subcommand("evaluate", "leave-one-out coverage/size/time benchmark");
  eval_cmd->require_subcommand(1);
  add_method_tree(eval_cmd, states, &selected, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error[Usage]: " << e.what() << "\n";
    return 2;
  }
  if (selected == nullptr) {
    std::cerr << "error[Usage]: no method selected\n";
    return 2;
  }

  try {
    return execute(*selected);
  } catch (const conformal::error& e) {
    std::cerr << "error[" << conformal::errc_name(e.code()) << "]: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error[Internal]: " << e.what() << "\n";
    return 4;
  }
}
