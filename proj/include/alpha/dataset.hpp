#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "alpha/io.hpp"
#include "alpha/matrix.hpp"

namespace alpha {

/// One data source: p x n_i observations, optional p x d covariates.
struct BatchPanel {
  std::string id;
  Matrix X;                  // p x n_i
  std::optional<Matrix> W;   // p x d
};

struct Dataset {
  std::vector<BatchPanel> batches;

  Index m() const { return static_cast<Index>(batches.size()); }
  Index p() const { return batches.empty() ? 0 : batches.front().X.rows(); }
  Index total_samples() const {
    Index n = 0;
    for (const auto& b : batches) n += b.X.cols();
    return n;
  }
};

struct Diagnostic {
  enum class Kind { DimensionMismatch, CovariateMismatch, InsufficientSamples, EmptyDataset };
  Kind kind;
  Index batch;  // 1-based; 0 for dataset-level diagnostics
  std::string message;
};

inline std::vector<Diagnostic> validate_dataset(const Dataset& d) {
  std::vector<Diagnostic> out;
  if (d.batches.empty()) {
    out.push_back({Diagnostic::Kind::EmptyDataset, 0, "dataset has no batches"});
    return out;
  }
  const Index p = d.batches.front().X.rows();
  std::optional<Index> dim;
  for (const auto& b : d.batches)
    if (b.W) { dim = b.W->cols(); break; }
  for (Index i = 0; i < d.m(); ++i) {
    const auto& b = d.batches[i];
    if (b.X.rows() != p)
      out.push_back({Diagnostic::Kind::DimensionMismatch, i + 1,
                     "batch " + b.id + ": p=" + std::to_string(b.X.rows()) +
                         " differs from p=" + std::to_string(p)});
    if (b.X.cols() < 2)
      out.push_back({Diagnostic::Kind::InsufficientSamples, i + 1,
                     "batch " + b.id + ": n_i=" + std::to_string(b.X.cols()) + " < 2"});
    if (b.W) {
      if (b.W->rows() != b.X.rows())
        out.push_back({Diagnostic::Kind::CovariateMismatch, i + 1,
                       "batch " + b.id + ": W has " + std::to_string(b.W->rows()) +
                           " rows, expected " + std::to_string(b.X.rows())});
      if (dim && b.W->cols() != *dim)
        out.push_back({Diagnostic::Kind::CovariateMismatch, i + 1,
                       "batch " + b.id + ": W has d=" + std::to_string(b.W->cols()) +
                           ", expected d=" + std::to_string(*dim)});
    }
  }
  return out;
}

/// Manifest: JSON file listing batches, paths relative to the manifest.
///   {"batches": [{"id": "b1", "x": "b1_x.csv", "w": "b1_w.csv"}, ...]}
inline Dataset load_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open manifest " + manifest_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("manifest " + manifest_path + ": " + e.what());
  }
  if (!j.contains("batches") || !j["batches"].is_array())
    throw IoError("manifest " + manifest_path + ": missing 'batches' array");
  const auto base = std::filesystem::path(manifest_path).parent_path();
  Dataset d;
  for (const auto& entry : j["batches"]) {
    BatchPanel b;
    b.id = entry.at("id").get<std::string>();
    const std::string xpath = (base / entry.at("x").get<std::string>()).string();
    b.X = load_matrix(xpath, format_for(xpath));
    if (entry.contains("w") && !entry["w"].is_null()) {
      const std::string wpath = (base / entry["w"].get<std::string>()).string();
      b.W = load_matrix(wpath, format_for(wpath));
    }
    d.batches.push_back(std::move(b));
  }
  return d;
}

}  // namespace alpha
