#pragma once

#include "ksamil/config.hpp"
#include "ksamil/data.hpp"
#include "ksamil/model.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace ksa {

/// Shortest decimal text that parses back to the same double; "nan", "inf"
/// and "-inf" for non-finite values.
std::string format_double(double value);

/// Inverse of format_double.
double parse_double(const std::string& text);

// ---------------------------------------------------------------------------
// CSV (comma separated, header row, no quoting: fields never contain commas)

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws DataError when absent.
  std::size_t column(const std::string& name) const;
};

void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Checkpoints: <stem>.bin holds every parameter as little-endian float64 in
// store order, <stem>.json names them with shapes and offsets.

inline constexpr const char* kCheckpointFormat = "ksamil-checkpoint-v1";

/// Checkpoint that cannot be read or does not fit the model it describes.
class CheckpointError : public DataError {
 public:
  using DataError::DataError;
};

void save_checkpoint(const std::filesystem::path& stem, const MilModelD& model);

/// Accepts the stem or either file of the pair.
MilModelD load_checkpoint(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Bag manifests

nlohmann::json bag_manifest(const std::vector<Bag>& bags);

struct ManifestBags {
  std::vector<Bag> bags;
  std::vector<Bag> held_out;
};

/// Rebuilds the bags of a manifest written by `run` from the dataset files
/// it references.  Relative dataset paths resolve against KSAMIL_DATA_ROOT
/// when set.
ManifestBags load_manifest_bags(const std::filesystem::path& manifest);

}  // namespace ksa
