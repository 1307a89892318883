#include "deepprae/errors.hpp"
#include "deepprae/runner.hpp"
#include "deepprae/scenarios.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace deepprae;

Vec read_vector_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::vector<double> vals;
  std::string line;
  while (std::getline(in, line)) {
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        vals.push_back(v);
      } catch (const std::exception&) {
        if (!vals.empty()) throw ConfigParse("non-numeric value '" + tok + "' in " + path);
        // Leading header tokens are skipped.
      }
    }
  }
  return Eigen::Map<Vec>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certified rare-event estimation runner"};
  app.require_subcommand(1);

  RunOptions opts;
  std::string manifest_path;
  auto* run = app.add_subcommand("run", "Execute a manifest and append to its results ledger");
  run->add_option("manifest", manifest_path, "Manifest JSON file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed-offset", opts.seed_offset, "Added to every manifest seed");
  run->add_option("--workers", opts.workers, "Parallel (gamma, seed) cells")->check(CLI::PositiveNumber);
  run->add_option("--dump-milp", opts.dump_milp_dir, "Write the first calibration and search MIPs (LP format) here");
  run->add_option("--model-out", opts.model_out_dir, "Save trained classifiers here");
  run->add_option("--model-in", opts.model_in_dir, "Load classifiers from here instead of training");
  run->add_option("--output-root", opts.output_root, "Overrides DEEPPRAE_OUTPUT_ROOT");

  std::string ledger_path, report_csv_path;
  auto* report = app.add_subcommand("report", "Summarize a results ledger");
  report->add_option("ledger", ledger_path, "Ledger CSV")->required()->check(CLI::ExistingFile);
  report->add_option("--csv", report_csv_path, "Also write the summary as CSV");

  std::string u_path, traj_out;
  double gamma = 1.0;
  bool innovations = false;
  auto* sim = app.add_subcommand("simulate-idm", "Simulate the car-following model for one LV throttle sequence");
  sim->add_option("u-csv", u_path, "Throttle values, one per epoch")->required()->check(CLI::ExistingFile);
  sim->add_option("--gamma", gamma, "AV capability parameter");
  sim->add_flag("--innovations", innovations, "Input holds throttle increments rather than levels");
  sim->add_option("--out", traj_out, "Trajectory CSV path (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto manifest = load_manifest(manifest_path);
      const auto summary = run_manifest(manifest, opts);
      std::cerr << summary.runs << " runs, " << summary.failed << " failed; ledger " << summary.ledger_path << "\n";
      return summary.failed == 0 ? 0 : 1;
    }
    if (*report) {
      const auto lines = summarize_ledger(read_ledger(ledger_path));
      std::cout << report_text(lines);
      if (!report_csv_path.empty()) {
        std::ofstream out(report_csv_path);
        if (!out) throw IoError("cannot write " + report_csv_path);
        out << report_csv(lines);
      }
      return 0;
    }
    if (*sim) {
      const auto params = IdmParams::for_gamma(gamma);
      Vec u = read_vector_csv(u_path);
      if (innovations) u = idm_throttle_from_innovations(u, params.u0);
      const auto out = idm_simulate(u, params, true);
      const auto csv = idm_trajectory_csv(out);
      if (traj_out.empty()) {
        std::cout << csv;
      } else {
        std::ofstream f(traj_out);
        if (!f) throw IoError("cannot write " + traj_out);
        f << csv;
      }
      std::cerr << "crash=" << (out.crash ? 1 : 0) << " min_gap=" << out.min_gap << " crash_time=" << out.crash_time
                << " sha256=" << sha256_hex(csv) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
