#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "ofs/chain.hpp"
#include "ofs/model.hpp"
#include "ofs/sandwich.hpp"

namespace ofs {

using Json = nlohmann::json;

/// Shortest decimal text that parses back to the same double.
std::string format_double(double x);
double parse_double(const std::string& text);

Json matrix_to_json(const Matrix& m);  // row-major array of rows
Matrix matrix_from_json(const Json& j);
Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j);
Json layout_to_json(const ParamLayout& layout);
ParamLayout layout_from_json(const Json& j);

// Chains: `<stem>.csv` holds a header of coordinate names plus log_value and
// one row per draw; `<stem>.json` holds the metadata.
void write_chain(const Chain& chain, const std::filesystem::path& csv_path);
Chain read_chain(const std::filesystem::path& csv_path);
std::filesystem::path chain_metadata_path(const std::filesystem::path& csv_path);
Json chain_config_to_json(const ChainConfig& c);
ChainConfig chain_config_from_json(const Json& j);

Json sandwich_to_json(const SandwichEstimate& s);
SandwichEstimate sandwich_from_json(const Json& j);
Json adjustment_to_json(const AdjustmentMatrix& a);
AdjustmentMatrix adjustment_from_json(const Json& j);

/// Single-realization field: columns x, y[, t], value[, covariate columns].
void write_gp_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset read_gp_dataset(const std::filesystem::path& path);

/// Replicated field: one row per (replicate, site) with columns
/// replicate, site, x, y, value.
void write_replicated_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset read_replicated_dataset(const std::filesystem::path& path);

/// Minimal CSV reader for the files above: header plus numeric rows.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
CsvTable read_csv(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace ofs
