#pragma once

#include "deepprae/estimators.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace deepprae {

std::string sha256_hex(std::string_view bytes);
std::string_view version_string();

struct MethodSpec {
  std::string method;  // deep, lazy, deep_mod, naive, ce, ams, peril_is
  BoundKind direction = BoundKind::Point;
  std::string params_json;  // method-specific settings, canonical JSON
};

struct RunManifest {
  std::string name;
  std::string scenario;
  std::vector<std::pair<std::string, double>> scenario_params;
  std::vector<double> gammas;
  std::vector<std::uint64_t> seeds;
  std::vector<MethodSpec> methods;
  std::string ledger = "results.csv";
  std::string artifacts = "artifacts";
  bool dump_trajectories = false;
  std::string canonical;  // canonical JSON of the whole manifest
  std::string hash;       // sha256(canonical + code version)
};

RunManifest parse_manifest(std::string_view json_text);
RunManifest load_manifest(const std::string& path);

struct RunOptions {
  std::uint64_t seed_offset = 0;
  int workers = 1;
  std::string dump_milp_dir;
  std::string model_out_dir;
  std::string model_in_dir;
  // Relative manifest paths resolve here; defaults to $DEEPPRAE_OUTPUT_ROOT, then ".".
  std::string output_root;
};

struct LedgerRow {
  std::string scenario;
  double gamma = 0.0;
  std::string method;
  std::string direction;
  double estimate = 0.0;
  double re = 0.0;
  long n1 = 0;
  long n2 = 0;
  bool certified = false;
  std::uint64_t seed = 0;
  double wall_time = 0.0;
  long hits = 0;
  long points = 0;  // mixture components (0 for methods without a dominating set)
  double truth = 0.0;
  std::string truth_tag;  // empty when no reference value exists
  std::string note;
  std::string manifest_sha256;
  std::string config;
};

std::string ledger_header();
std::string format_ledger_row(const LedgerRow& row);
std::vector<LedgerRow> parse_ledger(std::string_view text);
std::vector<LedgerRow> read_ledger(const std::string& path);

struct RunSummary {
  int runs = 0;
  int failed = 0;
  std::vector<LedgerRow> rows;
  std::string ledger_path;
};

RunSummary run_manifest(const RunManifest& manifest, const RunOptions& options = {});

struct ReportLine {
  std::string scenario;
  double gamma = 0.0;
  std::string method;
  std::string direction;
  int runs = 0;
  int certified = 0;
  double estimate = 0.0;  // mean over seeds
  double re = 0.0;        // mean over seeds
  double truth = 0.0;
  bool has_truth = false;
  double pct_error = 0.0;  // (estimate - truth) / truth * 100
  double bracket = 0.0;    // upper - lower for the same method family, when both exist
  bool has_bracket = false;
};

std::vector<ReportLine> summarize_ledger(const std::vector<LedgerRow>& rows);
std::string report_text(const std::vector<ReportLine>& lines);
std::string report_csv(const std::vector<ReportLine>& lines);

}  // namespace deepprae
