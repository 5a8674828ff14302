#include <iomanip>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sigsde/cli/commands.hpp"

using namespace sigsde;

int main(int argc, char** argv) {
  CLI::App app{"Train and evaluate neural SDE generators with signature kernel scores"};
  app.require_subcommand(1);
  app.fallthrough();
  unsigned n_workers = 0;
  app.add_option("--workers", n_workers, "Worker threads (0 = all cores); results do not depend on it");

  std::string config, out, checkpoint, data, data2, dump;
  bool test_split = false, quiet = false;

  auto* sim = app.add_subcommand("simulate", "Write the configured dataset as a path CSV");
  sim->add_option("--config", config)->required();
  sim->add_option("--out", out, "Output CSV")->required();
  sim->add_flag("--test", test_split, "Write the held-out split instead of the training split");

  auto* tr = app.add_subcommand("train", "Train a generator into a run directory");
  tr->add_option("--config", config)->required();
  tr->add_option("--out", out, "Run directory")->required();
  tr->add_flag("--quiet", quiet, "No progress on stderr");

  auto* ev = app.add_subcommand("eval", "KS, ACF and cross-correlation reports for a checkpoint");
  ev->add_option("--config", config)->required();
  ev->add_option("--checkpoint", checkpoint)->required();
  ev->add_option("--out", out, "Report directory")->required();
  ev->add_option("--dump-paths", dump, "Also write the generated paths to this CSV");

  auto* gr = app.add_subcommand("gram", "Dump the kernel Gram matrix of path CSV files");
  gr->add_option("--config", config)->required();
  gr->add_option("--data", data, "Path CSV (rows)")->required();
  gr->add_option("--data2", data2, "Path CSV (columns); defaults to --data");
  gr->add_option("--out", out, "Output CSV")->required();

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference checks of every differentiable stage");
  gc->add_option("--config", config)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? exit_ok : exit_validation;
  }

  try {
    set_workers(n_workers);
    const RunConfig cfg = load_config(config);
    if (*sim) {
      cmd_simulate(cfg, out, test_split);
    } else if (*tr) {
      const TrainOutcome r = cmd_train(cfg, out, quiet ? nullptr : &std::cerr);
      if (r.aborted) {
        std::cerr << "training diverged at " << r.reason << "; last good parameters in " << out << "/final.ckpt\n";
        return exit_runtime;
      }
    } else if (*ev) {
      const EvalOutcome e = cmd_eval(cfg, checkpoint, out, dump);
      std::cout << "time_index mean_ks rejection_rate\n";
      for (std::size_t k = 0; k < e.ks.time_index.size(); ++k)
        std::cout << std::setw(10) << e.ks.time_index[k] << ' ' << std::fixed << std::setprecision(4)
                  << e.ks.mean_ks[k] << ' ' << std::setprecision(3) << 100 * e.ks.rejection_rate[k] << "%\n";
    } else if (*gr) {
      cmd_gram(cfg, data, data2, out);
    } else if (*gc) {
      bool ok = true;
      for (const auto& r : cmd_gradcheck(cfg)) {
        std::cout << (r.pass ? "PASS " : "FAIL ") << std::left << std::setw(28) << r.name << " rel_err "
                  << std::scientific << std::setprecision(3) << r.rel_err << " tol " << r.tol << '\n';
        ok = ok && r.pass;
      }
      if (!ok) return exit_runtime;
    }
  } catch (const Error& e) {
    std::cerr << "sigsde: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "sigsde: " << e.what() << '\n';
    return exit_runtime;
  }
  return exit_ok;
}
