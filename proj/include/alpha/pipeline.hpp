#pragma once

// End-to-end runner: manifest -> regime routing -> adjustment -> pooled
// covariance -> optional CLIME graph, with every stage also usable on its
// own against persisted artifacts.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "alpha/aggregation.hpp"
#include "alpha/clime.hpp"
#include "alpha/dataset.hpp"
#include "alpha/factor.hpp"
#include "alpha/io.hpp"
#include "alpha/selection.hpp"
#include "alpha/sieve.hpp"

namespace alpha {

using nlohmann::json;

struct PipelineConfig {
  BasisSpec basis;
  double q = 0.01;
  Index K_max = 5;
  std::optional<Index> K_max_projected;
  std::optional<double> lambda;
  std::vector<double> lambda_grid;
  bool center = false;
  bool run_clime = true;
  bool write_residual_csv = false;
  std::map<std::string, Regime> force_regime;
  std::uint64_t seed = 1;
  int threads = 1;
  EdgeMode edge_mode = EdgeMode::nonzero;
  double edge_param = 1e-8;
};

inline PipelineConfig parse_config(const json& j) {
  PipelineConfig cfg;
  if (j.contains("basis")) {
    const auto& b = j["basis"];
    const std::string kind = b.value("kind", "indicator");
    if (kind == "indicator")
      cfg.basis.kind = BasisKind::indicator;
    else if (kind == "polynomial")
      cfg.basis.kind = BasisKind::polynomial;
    else if (kind == "bspline")
      cfg.basis.kind = BasisKind::bspline;
    else
      throw Error("config: unknown basis kind '" + kind + "'");
    cfg.basis.J = b.value("J", 10);
    cfg.basis.degree = b.value("degree", 3);
    if (b.contains("categories"))
      cfg.basis.categories = b["categories"].get<std::vector<double>>();
    if (b.contains("lo")) cfg.basis.lo = b["lo"].get<double>();
    if (b.contains("hi")) cfg.basis.hi = b["hi"].get<double>();
  }
  cfg.q = j.value("q", 0.01);
  cfg.K_max = j.value("K_max", 5);
  if (j.contains("K_max_projected") && !j["K_max_projected"].is_null())
    cfg.K_max_projected = j["K_max_projected"].get<Index>();
  if (j.contains("lambda") && !j["lambda"].is_null())
    cfg.lambda = j["lambda"].get<double>();
  if (j.contains("lambda_grid"))
    cfg.lambda_grid = j["lambda_grid"].get<std::vector<double>>();
  cfg.center = j.value("center", false);
  cfg.run_clime = j.value("run_clime", true);
  cfg.write_residual_csv = j.value("write_residual_csv", false);
  cfg.seed = j.value("seed", std::uint64_t{1});
  cfg.threads = j.value("threads", 1);
  if (j.contains("force_regime"))
    for (const auto& [id, val] : j["force_regime"].items()) {
      const std::string r = val.get<std::string>();
      if (r != "M1" && r != "M2") throw Error("config: force_regime must be M1 or M2");
      cfg.force_regime[id] = r == "M1" ? Regime::M1 : Regime::M2;
    }
  if (j.contains("edges")) {
    const auto& e = j["edges"];
    if (e.contains("top_sparsity")) {
      cfg.edge_mode = EdgeMode::top_sparsity;
      cfg.edge_param = e["top_sparsity"].get<double>();
    } else if (e.contains("nonzero")) {
      cfg.edge_mode = EdgeMode::nonzero;
      cfg.edge_param = e["nonzero"].get<double>();
    }
  }
  return cfg;
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("config " + path + ": " + e.what());
  }
  return parse_config(j);
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

namespace detail {

inline json regime_json(const RegimeAssignment& a, Index n) {
  json j;
  j["batch_id"] = a.batch_id;
  j["regime"] = a.regime == Regime::M1 ? "M1" : "M2";
  j["K"] = a.K;
  j["n"] = n;
  j["tested"] = a.tested;
  if (a.tested) {
    j["p_value"] = a.p_value;
    j["S"] = a.S;
    j["z"] = a.z;
  }
  return j;
}

inline void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
}

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path + " (missing upstream artifact?)");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
  return j;
}

}  // namespace detail

/// Regime routing plus per-batch adjustment; writes U_<id>.bin and adjust.json.
inline json stage_adjust(Dataset dataset, const PipelineConfig& cfg,
                         const std::string& outdir) {
  namespace fs = std::filesystem;
  fs::create_directories(outdir);

  const auto diagnostics = validate_dataset(dataset);
  if (!diagnostics.empty()) {
    std::string msg = "dataset validation failed:";
    for (const auto& d : diagnostics) msg += "\n  " + d.message;
    throw Error(msg);
  }
  if (cfg.center)
    for (auto& b : dataset.batches)
      b.X.colwise() -= Vector(b.X.rowwise().mean());

  SelectionConfig sel;
  sel.basis = cfg.basis;
  sel.q = cfg.q;
  sel.K_max = cfg.K_max;
  sel.K_max_projected = cfg.K_max_projected;
  auto assignments = assign_regimes(dataset, sel);

  // Explicit overrides bypass the test outcome.
  for (auto& a : assignments) {
    auto it = cfg.force_regime.find(a.batch_id);
    if (it == cfg.force_regime.end()) continue;
    const auto& batch = *std::find_if(dataset.batches.begin(), dataset.batches.end(),
                                      [&](const BatchPanel& b) { return b.id == a.batch_id; });
    if (it->second == Regime::M2 && !batch.W)
      throw Error("force_regime: batch " + a.batch_id + " has no covariates for M2");
    if (it->second != a.regime) {
      a.regime = it->second;
      if (a.regime == Regime::M2) {
        const auto ctx = build_projection(*batch.W, cfg.basis);
        Index kmax = cfg.K_max_projected ? *cfg.K_max_projected : ctx.rank / 2;
        kmax = std::max<Index>(1, std::min(kmax, std::min(ctx.rank, batch.X.cols()) - 1));
        a.K = estimate_k(batch.X, &ctx, kmax);
      } else {
        const Index kmax =
            std::min(cfg.K_max, std::min(batch.X.rows(), batch.X.cols()) - 1);
        a.K = estimate_k(batch.X, nullptr, std::max<Index>(1, kmax));
      }
    }
  }

  json report;
  report["batches"] = json::array();
  for (std::size_t i = 0; i < dataset.batches.size(); ++i) {
    const auto& b = dataset.batches[i];
    const auto& a = assignments[i];
    FactorFit fit;
    if (a.regime == Regime::M2) {
      const auto ctx = build_projection(*b.W, cfg.basis);
      fit = fit_ppca(b.X, ctx, a.K);
    } else {
      fit = fit_pca(b.X, a.K);
    }
    const std::string ubin = "U_" + b.id + ".bin";
    save_matrix_binary(fit.U, (std::filesystem::path(outdir) / ubin).string());
    if (cfg.write_residual_csv)
      save_matrix_csv(fit.U, (std::filesystem::path(outdir) / ("U_" + b.id + ".csv")).string());
    json entry = detail::regime_json(a, b.X.cols());
    entry["residual_file"] = ubin;
    report["batches"].push_back(entry);
  }
  detail::write_json(report, (std::filesystem::path(outdir) / "adjust.json").string());
  return report;
}

/// Pool persisted residuals into sigma.bin with a JSON sidecar.
inline AggregateEstimate stage_aggregate(const std::string& outdir) {
  namespace fs = std::filesystem;
  const json adj = detail::read_json((fs::path(outdir) / "adjust.json").string());
  std::vector<BatchContribution> contribs;
  for (const auto& entry : adj.at("batches")) {
    BatchContribution con;
    con.batch_id = entry.at("batch_id").get<std::string>();
    con.n = entry.at("n").get<Index>();
    con.K = entry.at("K").get<Index>();
    con.regime = entry.at("regime").get<std::string>() == "M2" ? Regime::M2 : Regime::M1;
    con.U = load_matrix_binary(
        (fs::path(outdir) / entry.at("residual_file").get<std::string>()).string());
    contribs.push_back(std::move(con));
  }
  auto agg = aggregate_sigma(contribs);
  save_matrix_binary(agg.Sigma_hat, (fs::path(outdir) / "sigma.bin").string());
  json sidecar;
  sidecar["N"] = agg.N;
  sidecar["K_total"] = agg.K_total;
  sidecar["p"] = agg.Sigma_hat.rows();
  sidecar["per_batch"] = json::array();
  for (const auto& e : agg.per_batch)
    sidecar["per_batch"].push_back({{"batch_id", e.batch_id},
                                    {"n", e.n},
                                    {"K", e.K},
                                    {"regime", e.regime == Regime::M2 ? "M2" : "M1"}});
  detail::write_json(sidecar, (fs::path(outdir) / "sigma.json").string());
  return agg;
}

/// CLIME on sigma.bin: omega.bin, edges.csv, graph.json.
inline ClimeSolution stage_graph(const std::string& outdir, const PipelineConfig& cfg) {
  namespace fs = std::filesystem;
  const Matrix sigma = load_matrix_binary((fs::path(outdir) / "sigma.bin").string());
  double lambda;
  if (cfg.lambda) {
    lambda = *cfg.lambda;
  } else if (!cfg.lambda_grid.empty()) {
    lambda = select_lambda(sigma, cfg.lambda_grid, sigma, cfg.threads);
  } else {
    throw Error("graph stage needs 'lambda' or a 'lambda_grid' in the config");
  }
  auto sol = clime_solve(sigma, lambda, cfg.threads);

  double max_gap = 0.0;
  long max_iter = 0;
  for (const auto& st : sol.column_status) {
    max_gap = std::max(max_gap, st.feasibility_gap);
    max_iter = std::max(max_iter, st.iterations);
  }
  if (max_gap > 1e-8)
    throw NumericError("stage_graph: CLIME feasibility certificate violated (gap " +
                       std::to_string(max_gap) + ")");

  save_matrix_binary(sol.Omega, (fs::path(outdir) / "omega.bin").string());
  const auto edges = extract_edges(sol.Omega, cfg.edge_mode, cfg.edge_param);
  {
    std::ofstream out((fs::path(outdir) / "edges.csv").string());
    if (!out) throw IoError("cannot write edges.csv");
    out << "i,j,omega_ij\n";
    char buf[64];
    for (const auto& [i, j] : edges.edges) {
      std::snprintf(buf, sizeof(buf), "%.17g", sol.Omega(i, j));
      out << (i + 1) << ',' << (j + 1) << ',' << buf << '\n';
    }
  }
  json g;
  g["lambda"] = lambda;
  g["max_feasibility_gap"] = max_gap;
  g["max_column_iterations"] = max_iter;
  g["edge_count"] = edges.edges.size();
  g["sparsity"] = edges.sparsity;
  detail::write_json(g, (fs::path(outdir) / "graph.json").string());
  return sol;
}

/// The whole pipeline; stage composition with identical config produces
/// byte-identical artifacts.
inline json run_alpha(const std::string& manifest_path, const PipelineConfig& cfg,
                      const std::string& outdir, const json& raw_config = json::object()) {
  auto dataset = load_manifest(manifest_path);
  const json adjust_report = stage_adjust(std::move(dataset), cfg, outdir);
  const auto agg = stage_aggregate(outdir);

  json report;
  report["seed"] = cfg.seed;
  report["config_hash"] = fnv1a(raw_config.dump());
  report["config"] = raw_config;
  report["batches"] = adjust_report["batches"];
  report["N"] = agg.N;
  report["K_total"] = agg.K_total;
  report["outputs"] = json::array({"sigma.bin", "sigma.json"});
  if (cfg.run_clime) {
    stage_graph(outdir, cfg);
    report["graph"] = detail::read_json(
        (std::filesystem::path(outdir) / "graph.json").string());
    report["outputs"].push_back("omega.bin");
    report["outputs"].push_back("edges.csv");
  }
  detail::write_json(report, (std::filesystem::path(outdir) / "report.json").string());
  return report;
}

}  // namespace alpha
