#include "deepprae/runner.hpp"

#include "deepprae/baselines.hpp"
#include "deepprae/errors.hpp"
#include "deepprae/pipeline.hpp"
#include "deepprae/scenarios.hpp"

#include "json.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

namespace deepprae {

namespace fs = std::filesystem;
using nlohmann::json;

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xf]);
  }
  return out;
}

std::string_view version_string() { return "deepprae-0.1.0"; }

namespace {

const std::vector<std::string> kMethods = {"deep", "lazy", "deep_mod", "naive", "ce", "ams", "peril_is"};

template <typename T>
T get_or(const json& j, const char* key, T def) {
  if (!j.contains(key)) return def;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigParse(std::string("bad value for '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : keys) ok = ok || it.key() == k;
    if (!ok) throw ConfigParse("unknown key '" + it.key() + "' in " + where);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string gamma_tag(double g) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", g);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n') {
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else if (c != '\r') {
      field += c;
      any = true;
    }
  }
  if (any) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

const std::vector<std::string> kColumns = {"scenario", "gamma", "method", "direction", "estimate", "re",
                                           "n1", "n2", "certified", "seed", "wall_time", "hits",
                                           "points", "truth", "truth_tag", "note", "manifest_sha256", "config"};

PipelineConfig pipeline_config(const json& j, std::uint64_t seed, int is_workers_default) {
  reject_unknown(j,
                 {"n1", "n2", "hidden", "sampler", "epochs", "learning_rate", "batch_size", "max_frontier",
                  "calibration_node_limit", "search_node_limit", "max_points", "kappa_tol", "is_workers", "ce", "ams"},
                 "pipeline method");
  PipelineConfig c;
  c.seed = seed;
  c.n1 = get_or<long>(j, "n1", c.n1);
  c.n2 = get_or<long>(j, "n2", c.n2);
  c.hidden = get_or<std::vector<int>>(j, "hidden", c.hidden);
  c.sampler = stage1_sampler_from_string(get_or<std::string>(j, "sampler", "uniform"));
  c.train.epochs = get_or<int>(j, "epochs", c.train.epochs);
  c.train.learning_rate = get_or<double>(j, "learning_rate", c.train.learning_rate);
  c.train.batch_size = get_or<int>(j, "batch_size", c.train.batch_size);
  c.max_frontier = get_or<std::size_t>(j, "max_frontier", 0);
  c.calibration.milp.node_limit = get_or<long>(j, "calibration_node_limit", c.calibration.milp.node_limit);
  c.search.milp.node_limit = get_or<long>(j, "search_node_limit", c.search.milp.node_limit);
  c.search.max_points = get_or<std::size_t>(j, "max_points", c.search.max_points);
  c.calibration.tol = get_or<double>(j, "kappa_tol", c.calibration.tol);
  c.workers = get_or<int>(j, "is_workers", is_workers_default);
  if (j.contains("ce")) {
    const auto& ce = j.at("ce");
    reject_unknown(ce, {"kind", "components", "rho", "iterations_max", "n_per_iter", "n_final", "smoothing"}, "ce");
    c.ce.kind = get_or<std::string>(ce, "kind", "single") == "gmm" ? CeKind::Gmm : CeKind::SingleGaussian;
    c.ce.components = get_or<int>(ce, "components", c.ce.components);
    c.ce.rho = get_or<double>(ce, "rho", c.ce.rho);
    c.ce.iterations_max = get_or<int>(ce, "iterations_max", c.ce.iterations_max);
    c.ce.n_per_iter = get_or<long>(ce, "n_per_iter", c.ce.n_per_iter);
    c.ce.n_final = get_or<long>(ce, "n_final", c.ce.n_final);
    c.ce.smoothing = get_or<double>(ce, "smoothing", c.ce.smoothing);
  }
  if (j.contains("ams")) {
    const auto& a = j.at("ams");
    reject_unknown(a, {"particles", "kill_fraction", "mh_steps", "proposal_std"}, "ams");
    c.ams.n_particles = get_or<long>(a, "particles", c.ams.n_particles);
    c.ams.kill_fraction = get_or<double>(a, "kill_fraction", c.ams.kill_fraction);
    c.ams.mh_steps = get_or<int>(a, "mh_steps", c.ams.mh_steps);
    c.ams.proposal_std = get_or<double>(a, "proposal_std", c.ams.proposal_std);
  }
  return c;
}

CeConfig ce_config(const json& j) {
  reject_unknown(j, {"kind", "components", "rho", "iterations_max", "n_per_iter", "n_final", "smoothing"}, "ce method");
  CeConfig c;
  const auto kind = get_or<std::string>(j, "kind", "single");
  if (kind != "single" && kind != "gmm") throw ConfigParse("ce kind must be single or gmm");
  c.kind = kind == "gmm" ? CeKind::Gmm : CeKind::SingleGaussian;
  c.components = get_or<int>(j, "components", c.components);
  c.rho = get_or<double>(j, "rho", c.rho);
  c.iterations_max = get_or<int>(j, "iterations_max", c.iterations_max);
  c.n_per_iter = get_or<long>(j, "n_per_iter", c.n_per_iter);
  c.n_final = get_or<long>(j, "n_final", c.n_final);
  c.smoothing = get_or<double>(j, "smoothing", c.smoothing);
  c.validate();
  return c;
}

AmsConfig ams_config(const json& j) {
  reject_unknown(j, {"particles", "kill_fraction", "mh_steps", "proposal_std"}, "ams method");
  AmsConfig c;
  c.n_particles = get_or<long>(j, "particles", c.n_particles);
  c.kill_fraction = get_or<double>(j, "kill_fraction", c.kill_fraction);
  c.mh_steps = get_or<int>(j, "mh_steps", c.mh_steps);
  c.proposal_std = get_or<double>(j, "proposal_std", c.proposal_std);
  c.validate();
  return c;
}

IdmParams idm_params(const RunManifest& m, double gamma) {
  IdmParams p = IdmParams::for_gamma(gamma);
  for (const auto& [k, v] : m.scenario_params) {
    if (k == "sigma_u") p.sigma_u = v;
    if (k == "lv_accel_slope") p.lv_accel_slope = v;
    if (k == "initial_gap") p.initial_gap = v;
    if (k == "initial_speed") p.initial_speed = v;
    if (k == "dt") p.dt_integrate = v;
  }
  return p;
}

struct Paths {
  fs::path root;
  fs::path ledger;
  fs::path artifacts;
};

Paths resolve_paths(const RunManifest& m, const RunOptions& o) {
  fs::path root = o.output_root;
  if (root.empty()) {
    const char* env = std::getenv("DEEPPRAE_OUTPUT_ROOT");
    root = env && *env ? fs::path(env) : fs::path(".");
  }
  auto under = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : root / p; };
  return {root, under(m.ledger), under(m.artifacts) / m.name};
}

// One (gamma, seed) cell: every method in the manifest, sharing Stage-1 data.
std::vector<LedgerRow> run_cell(const RunManifest& m, const RunOptions& o, const Paths& paths, double gamma,
                                std::uint64_t seed, int& failed) {
  std::vector<LedgerRow> rows;
  std::map<std::string, Stage1Data> stage1_cache;
  const ProblemSpec problem = make_problem(m.scenario, gamma, m.scenario_params);

  for (const auto& ms : m.methods) {
    const json params = json::parse(ms.params_json);
    LedgerRow row;
    row.scenario = problem.name;
    row.gamma = gamma;
    row.method = ms.method;
    row.direction = std::string(to_string(ms.direction));
    row.seed = seed;
    row.manifest_sha256 = m.hash;
    row.config = problem.config_string();
    if (problem.truth) {
      row.truth = problem.truth->value;
      row.truth_tag = problem.truth->tag;
    }
    const std::string run_id = problem.name + "_g" + gamma_tag(gamma) + "_" + ms.method + "_" + row.direction + "_s" +
                               std::to_string(seed);
    json artifact;
    artifact["run_id"] = run_id;
    artifact["manifest_sha256"] = m.hash;
    try {
      EstimateReport rep;
      if (ms.method == "deep" || ms.method == "lazy" || ms.method == "deep_mod") {
        auto cfg = pipeline_config(params, seed, 1);
        if (!o.dump_milp_dir.empty()) {
          cfg.calibration.dump_milp_path = (fs::path(o.dump_milp_dir) / (run_id + "_calibration.lp")).string();
          cfg.search.dump_milp_path = (fs::path(o.dump_milp_dir) / (run_id + "_search.lp")).string();
          fs::create_directories(o.dump_milp_dir);
        }
        const std::string key = std::string(to_string(cfg.sampler)) + "|" + std::to_string(cfg.n1) + "|" +
                                params.value("ce", json::object()).dump() + "|" +
                                params.value("ams", json::object()).dump();
        auto it = stage1_cache.find(key);
        if (it == stage1_cache.end()) it = stage1_cache.emplace(key, stage1_samples(problem, cfg)).first;

        const Direction dir = ms.direction == BoundKind::Lower ? Direction::Inner : Direction::Outer;
        if (ms.method != "lazy" && !o.model_in_dir.empty()) {
          const std::size_t pieces = problem.symmetry == Symmetry::SplitOrthants ? problem.pieces().size() : 1;
          for (std::size_t k = 0; k < pieces; ++k)
            cfg.models.push_back(load_params_file(
                (fs::path(o.model_in_dir) / (run_id + "_piece" + std::to_string(k) + ".mlp")).string()));
        }
        PipelineResult pr = ms.method == "lazy" ? lazy_prae(problem, cfg, dir, &it->second)
                                                : deep_prae(problem, cfg, dir, &it->second);
        rep = pr.report;
        if (ms.method == "deep_mod") {
          // Same anchors, true set as the indicator.
          std::vector<TiltComponent> comps;
          for (const auto& a : pr.anchors) comps.push_back(tilt_param(problem.family, a));
          const auto proposal = MixtureProposal::uniform(problem.family, comps);
          rep = mixture_is(problem.oracle, proposal, cfg.n2, derive_seed(seed, 7), cfg.workers, BoundKind::Point);
          rep.n_used = cfg.n1 + cfg.n2;
          rep.wall_time += pr.report.wall_time;
        }
        row.n1 = cfg.n1;
        row.n2 = cfg.n2;
        row.points = static_cast<long>(pr.dominating_points());

        artifact["n_label0"] = pr.n_label0;
        artifact["n_label1"] = pr.n_label1;
        artifact["stage1_time"] = pr.stage1_time;
        artifact["stage2_time"] = pr.stage2_time;
        artifact["orthant_estimates"] = pr.orthant_estimates;
        json pieces = json::array();
        DominatingSet all;
        for (std::size_t k = 0; k < pr.pieces.size(); ++k) {
          const auto& pc = pr.pieces[k];
          json pj;
          pj["skipped"] = pc.skipped;
          pj["signs"] = std::vector<double>(pc.orientation.signs.begin(), pc.orientation.signs.end());
          pj["residual"] = std::string(to_string(pc.dom.status));
          pj["points"] = pc.dom.points.size();
          pj["mip_nodes"] = pc.dom.mip_nodes;
          if (pc.hull) {
            pj["hull_size"] = pc.hull->size();
            const auto hull_file = run_id + "_hull" + std::to_string(k) + ".csv";
            write_file(paths.artifacts / hull_file, hull_to_csv(*pc.hull));
            pj["hull_file"] = hull_file;
          }
          if (pc.set) {
            pj["kappa_hat"] = pc.set->kappa_hat;
            pj["verified"] = pc.set->verified;
            pj["calibration_mip_solves"] = pc.set->mip_solves;
            pj["calibration_mip_nodes"] = pc.set->mip_nodes;
            pj["train_loss"] = pc.set->params.final_loss;
            if (!o.model_out_dir.empty()) {
              const auto path = fs::path(o.model_out_dir) / (run_id + "_piece" + std::to_string(k) + ".mlp");
              fs::create_directories(o.model_out_dir);
              save_params_file(pc.set->params, path.string());
              pj["model_file"] = path.string();
            }
          }
          pieces.push_back(pj);
          all.points.insert(all.points.end(), pc.dom.points.begin(), pc.dom.points.end());
          all.tilts.insert(all.tilts.end(), pc.dom.tilts.begin(), pc.dom.tilts.end());
          all.rates.insert(all.rates.end(), pc.dom.rates.begin(), pc.dom.rates.end());
        }
        artifact["pieces"] = pieces;
        write_file(paths.artifacts / (run_id + "_dominating.csv"), dominating_set_to_csv(all));

        if (m.dump_trajectories && problem.name == "idm") {
          const auto ip = idm_params(m, gamma);
          for (std::size_t k = 0; k < pr.anchors.size(); ++k) {
            const auto out = idm_simulate(idm_throttle_from_innovations(pr.anchors[k], ip.u0), ip, true);
            write_file(paths.artifacts / (run_id + "_traj" + std::to_string(k) + ".csv"), idm_trajectory_csv(out));
          }
        }
      } else if (ms.method == "naive") {
        reject_unknown(params, {"n"}, "naive method");
        Rng rng(derive_seed(seed, 11));
        rep = naive_mc(problem.oracle, problem.family, get_or<long>(params, "n", 100000), rng);
        row.n2 = rep.n_used;
      } else if (ms.method == "ce") {
        Rng rng(derive_seed(seed, 12));
        const auto cfg = ce_config(params);
        auto res = cross_entropy(problem.level, problem.gamma, problem.gaussian(), cfg, rng);
        rep = res.report;
        row.n2 = rep.n_used;
        row.points = static_cast<long>(res.proposal.components().size());
        artifact["levels"] = res.levels;
      } else if (ms.method == "ams") {
        Rng rng(derive_seed(seed, 13));
        auto res = ams(problem.level, problem.gamma, problem.gaussian(), ams_config(params), rng);
        rep = res.report;
        row.n2 = rep.n_used;
        artifact["levels"] = res.levels;
      } else if (ms.method == "peril_is") {
        reject_unknown(params, {"n", "k"}, "peril_is method");
        if (problem.name != "peril_1d") throw InvalidArgument("peril_is runs on the peril_1d scenario only");
        Rng rng(derive_seed(seed, 14));
        double k = 0.5;
        for (const auto& [key, v] : m.scenario_params)
          if (key == "k") k = v;
        rep = peril_single_point_is(gamma, get_or<double>(params, "k", k), get_or<long>(params, "n", 10000), rng);
        row.n2 = rep.n_used;
        row.points = 1;
      }
      rep.seed = seed;
      row.estimate = rep.estimate;
      row.re = rep.empirical_re;
      row.certified = rep.certified;
      row.wall_time = rep.wall_time;
      row.hits = rep.hits;
      row.note = rep.note;
      artifact["report"] = json::parse(report_to_json(rep));
    } catch (const std::exception& e) {
      ++failed;
      row.estimate = std::nan("");
      row.re = std::nan("");
      row.note = std::string("error: ") + e.what();
      artifact["error"] = e.what();
    }
    std::replace(row.note.begin(), row.note.end(), '\n', ' ');
    write_file(paths.artifacts / (run_id + ".json"), artifact.dump(2) + "\n");
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

RunManifest parse_manifest(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigParse(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigParse("manifest must be a JSON object");
  reject_unknown(j, {"name", "scenario", "gammas", "seeds", "methods", "output", "dump_trajectories"}, "manifest");
  RunManifest m;
  m.name = get_or<std::string>(j, "name", "run");
  if (!j.contains("scenario")) throw ConfigParse("manifest needs a scenario");
  const auto& sc = j.at("scenario");
  if (sc.is_string()) {
    m.scenario = sc.get<std::string>();
  } else {
    reject_unknown(sc, {"name", "params"}, "scenario");
    m.scenario = get_or<std::string>(sc, "name", "");
    if (sc.contains("params")) {
      for (auto it = sc.at("params").begin(); it != sc.at("params").end(); ++it) {
        if (!it.value().is_number()) throw ConfigParse("scenario parameter '" + it.key() + "' must be numeric");
        m.scenario_params.emplace_back(it.key(), it.value().get<double>());
      }
    }
  }
  m.gammas = get_or<std::vector<double>>(j, "gammas", {});
  m.seeds = get_or<std::vector<std::uint64_t>>(j, "seeds", {});
  if (m.gammas.empty()) throw ConfigParse("manifest needs at least one gamma");
  if (m.seeds.empty()) throw ConfigParse("manifest needs an explicit seed list");
  m.dump_trajectories = get_or<bool>(j, "dump_trajectories", false);
  if (j.contains("output")) {
    const auto& out = j.at("output");
    reject_unknown(out, {"ledger", "artifacts"}, "output");
    m.ledger = get_or<std::string>(out, "ledger", m.ledger);
    m.artifacts = get_or<std::string>(out, "artifacts", m.artifacts);
  }
  for (const auto& mj : get_or<json>(j, "methods", json::array())) {
    if (!mj.is_object() || !mj.contains("method")) throw ConfigParse("every method entry needs a 'method' key");
    MethodSpec ms;
    ms.method = mj.at("method").get<std::string>();
    if (std::find(kMethods.begin(), kMethods.end(), ms.method) == kMethods.end())
      throw ConfigParse("unknown method: " + ms.method);
    const bool bounded = ms.method == "deep" || ms.method == "lazy";
    ms.direction = bound_kind_from_string(get_or<std::string>(mj, "direction", bounded ? "upper" : "point"));
    if (bounded == (ms.direction == BoundKind::Point))
      throw ConfigParse(ms.method + ": deep/lazy need upper|lower, other methods are point estimates");
    json p = mj;
    p.erase("method");
    p.erase("direction");
    ms.params_json = p.dump();
    m.methods.push_back(std::move(ms));
  }
  // Parse method settings once up front so configuration errors surface before any run.
  for (const auto& ms : m.methods) {
    const json p = json::parse(ms.params_json);
    if (ms.method == "deep" || ms.method == "lazy" || ms.method == "deep_mod") pipeline_config(p, 0, 1);
    if (ms.method == "ce") ce_config(p);
    if (ms.method == "ams") ams_config(p);
  }
  m.canonical = j.dump();
  m.hash = sha256_hex(m.canonical + "\n" + std::string(version_string()));
  return m;
}

RunManifest load_manifest(const std::string& path) { return parse_manifest(read_file(path)); }

std::string ledger_header() {
  std::string h;
  for (std::size_t i = 0; i < kColumns.size(); ++i) h += (i ? "," : "") + kColumns[i];
  return h + "\n";
}

std::string format_ledger_row(const LedgerRow& r) {
  char wt[32];
  std::snprintf(wt, sizeof wt, "%.3f", r.wall_time);
  const std::vector<std::string> f = {csv_field(r.scenario),
                                      num(r.gamma),
                                      csv_field(r.method),
                                      csv_field(r.direction),
                                      num(r.estimate),
                                      num(r.re),
                                      std::to_string(r.n1),
                                      std::to_string(r.n2),
                                      r.certified ? "1" : "0",
                                      std::to_string(r.seed),
                                      wt,
                                      std::to_string(r.hits),
                                      std::to_string(r.points),
                                      r.truth_tag.empty() ? "" : num(r.truth),
                                      csv_field(r.truth_tag),
                                      csv_field(r.note),
                                      r.manifest_sha256,
                                      csv_field(r.config)};
  std::string s;
  for (std::size_t i = 0; i < f.size(); ++i) s += (i ? "," : "") + f[i];
  return s + "\n";
}

std::vector<LedgerRow> parse_ledger(std::string_view text) {
  const auto rows = parse_csv(text);
  if (rows.empty()) throw MissingColumns("ledger is empty");
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < rows[0].size(); ++i) col[rows[0][i]] = i;
  for (const auto& c : kColumns)
    if (!col.count(c)) throw MissingColumns("ledger lacks column '" + c + "'");
  std::vector<LedgerRow> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r];
    if (f.size() == 1 && f[0].empty()) continue;
    if (f.size() != rows[0].size()) throw MissingColumns("ledger row " + std::to_string(r) + " has the wrong field count");
    auto at = [&](const char* name) -> const std::string& { return f[col.at(name)]; };
    auto dbl = [&](const char* name) { return at(name).empty() ? 0.0 : std::strtod(at(name).c_str(), nullptr); };
    LedgerRow row;
    row.scenario = at("scenario");
    row.gamma = dbl("gamma");
    row.method = at("method");
    row.direction = at("direction");
    row.estimate = dbl("estimate");
    row.re = dbl("re");
    row.n1 = std::atol(at("n1").c_str());
    row.n2 = std::atol(at("n2").c_str());
    row.certified = at("certified") == "1";
    row.seed = std::strtoull(at("seed").c_str(), nullptr, 10);
    row.wall_time = dbl("wall_time");
    row.hits = std::atol(at("hits").c_str());
    row.points = std::atol(at("points").c_str());
    row.truth = dbl("truth");
    row.truth_tag = at("truth_tag");
    row.note = at("note");
    row.manifest_sha256 = at("manifest_sha256");
    row.config = at("config");
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<LedgerRow> read_ledger(const std::string& path) { return parse_ledger(read_file(path)); }

RunSummary run_manifest(const RunManifest& m, const RunOptions& o) {
  if (o.workers < 1) throw InvalidArgument("workers must be >= 1");
  const Paths paths = resolve_paths(m, o);
  struct Cell {
    double gamma;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (double g : m.gammas)
    for (auto s : m.seeds) cells.push_back({g, s + o.seed_offset});

  std::vector<std::vector<LedgerRow>> results(cells.size());
  std::vector<int> failures(cells.size(), 0);
  std::vector<std::string> errors(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        results[i] = run_cell(m, o, paths, cells[i].gamma, cells[i].seed, failures[i]);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  if (o.workers == 1 || m.methods.empty()) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < o.workers; ++w) pool.emplace_back(worker);
  }
  for (const auto& e : errors)
    if (!e.empty()) throw InvalidArgument(e);

  RunSummary sum;
  sum.ledger_path = paths.ledger.string();
  const bool fresh = !fs::exists(paths.ledger) || fs::file_size(paths.ledger) == 0;
  std::error_code ec;
  if (paths.ledger.has_parent_path()) fs::create_directories(paths.ledger.parent_path(), ec);
  std::ofstream out(paths.ledger, std::ios::app | std::ios::binary);
  if (!out) throw IoError("cannot open ledger " + paths.ledger.string());
  if (fresh) out << ledger_header();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (auto& r : results[i]) {
      out << format_ledger_row(r);
      sum.rows.push_back(std::move(r));
    }
    sum.failed += failures[i];
  }
  sum.runs = static_cast<int>(sum.rows.size());
  if (!out) throw IoError("failed writing ledger " + paths.ledger.string());
  return sum;
}

std::vector<ReportLine> summarize_ledger(const std::vector<LedgerRow>& rows) {
  std::vector<ReportLine> lines;
  std::vector<std::vector<const LedgerRow*>> members;
  for (const auto& r : rows) {
    auto it = std::find_if(lines.begin(), lines.end(), [&](const ReportLine& l) {
      return l.scenario == r.scenario && l.gamma == r.gamma && l.method == r.method && l.direction == r.direction;
    });
    if (it == lines.end()) {
      lines.push_back({r.scenario, r.gamma, r.method, r.direction});
      members.emplace_back();
      it = lines.end() - 1;
    }
    members[static_cast<std::size_t>(it - lines.begin())].push_back(&r);
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto& l = lines[i];
    std::vector<double> est, re;
    for (const auto* r : members[i]) {
      if (std::isnan(r->estimate)) continue;
      est.push_back(r->estimate);
      re.push_back(r->re);
      ++l.runs;
      if (r->certified) ++l.certified;
      if (!r->truth_tag.empty()) {
        l.truth = r->truth;
        l.has_truth = true;
      }
    }
    if (l.runs > 0) {
      l.estimate = pairwise_sum(est) / l.runs;
      l.re = pairwise_sum(re) / l.runs;
    }
    if (l.has_truth && l.truth != 0.0) l.pct_error = (l.estimate - l.truth) / l.truth * 100.0;
  }
  for (auto& l : lines) {
    if (l.direction != "upper" && l.direction != "lower") continue;
    const std::string other = l.direction == "upper" ? "lower" : "upper";
    for (const auto& m : lines) {
      if (m.scenario == l.scenario && m.gamma == l.gamma && m.method == l.method && m.direction == other &&
          l.runs > 0 && m.runs > 0) {
        l.bracket = l.direction == "upper" ? l.estimate - m.estimate : m.estimate - l.estimate;
        l.has_bracket = true;
      }
    }
  }
  return lines;
}

std::string report_text(const std::vector<ReportLine>& lines) {
  std::ostringstream os;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-12s %6s %-9s %-6s %4s %4s %12s %10s %12s %9s %12s\n", "scenario", "gamma", "method",
                "dir", "runs", "cert", "estimate", "re", "truth", "err%", "bracket");
  os << buf;
  for (const auto& l : lines) {
    auto opt = [](bool has, double v, const char* f) {
      char b[64];
      if (!has) return std::string("-");
      std::snprintf(b, sizeof b, f, v);
      return std::string(b);
    };
    std::snprintf(buf, sizeof buf, "%-12s %6g %-9s %-6s %4d %4d %12.4e %10.4g %12s %9s %12s\n", l.scenario.c_str(),
                  l.gamma, l.method.c_str(), l.direction.c_str(), l.runs, l.certified, l.estimate, l.re,
                  opt(l.has_truth, l.truth, "%.4e").c_str(), opt(l.has_truth, l.pct_error, "%+.2f").c_str(),
                  opt(l.has_bracket, l.bracket, "%.4e").c_str());
    os << buf;
  }
  return os.str();
}

std::string report_csv(const std::vector<ReportLine>& lines) {
  std::ostringstream os;
  os << "scenario,gamma,method,direction,runs,certified,estimate,re,truth,pct_error,bracket\n";
  for (const auto& l : lines) {
    os << csv_field(l.scenario) << ',' << num(l.gamma) << ',' << csv_field(l.method) << ',' << l.direction << ','
       << l.runs << ',' << l.certified << ',' << num(l.estimate) << ',' << num(l.re) << ','
       << (l.has_truth ? num(l.truth) : "") << ',' << (l.has_truth ? num(l.pct_error) : "") << ','
       << (l.has_bracket ? num(l.bracket) : "") << '\n';
  }
  return os.str();
}

}  // namespace deepprae
