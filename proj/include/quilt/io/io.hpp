#pragma once

#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "quilt/core/types.hpp"
#include "quilt/eval/eval.hpp"

// File formats. Matrices and datasets are headered CSV (row-major, '.'
// decimal, %.17g so values round-trip); masks are separate 0/1 CSVs; designs
// and configs are JSON. All indices are 1-based on disk and converted here.

namespace quilt::io {

void write_matrix_csv(const std::string& path, const Matrix& m,
                      const std::vector<std::string>& column_names);
void write_matrix_csv(const std::string& path, const Matrix& m);

struct CsvMatrix {
    Matrix values;
    std::vector<std::string> column_names;
};
CsvMatrix read_matrix_csv(const std::string& path);

void write_mask_csv(const std::string& path, const PairMask& mask);
PairMask read_mask_csv(const std::string& path);

void write_edges_csv(const std::string& path, const EdgeSet& edges);
EdgeSet read_edges_csv(const std::string& path, int p);

void write_design_json(const std::string& path, const BlockDesign& design);
BlockDesign read_design_json(const std::string& path);

void write_sweep_csv(const std::string& path, const SweepResult& sweep);
void write_sweep_summary_csv(const std::string& path, const SweepResult& sweep);

/// FNV-1a hash of a file's bytes, hex-encoded; recorded in manifests.
std::string file_hash(const std::string& path);

void write_manifest(const std::string& path, const std::string& command,
                    const std::string& config_hash, std::uint64_t seed,
                    const std::vector<std::string>& outputs);

std::string format_double(double v);

nlohmann::json load_json(const std::string& path);

/// Rejects keys outside the allowed set (schema validation).
void require_keys(const nlohmann::json& obj, const std::vector<std::string>& allowed,
                  const std::string& where);

}  // namespace quilt::io
