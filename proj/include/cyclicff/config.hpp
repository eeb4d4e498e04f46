#pragma once

#include "cyclicff/training.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace cyclicff {

/// Bad configuration text or values. `line` is 0 when the problem is not
/// tied to a line of the config file (overrides, missing files).
class ConfigError : public ParameterError {
public:
    ConfigError(const std::string& message, std::size_t line = 0);
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

enum class DatasetKind { mnist, embeddings, blobs };

struct DataConfig {
    DatasetKind kind = DatasetKind::blobs;
    std::filesystem::path mnist_dir;   // holds the four IDX files
    std::filesystem::path train_path;  // embedding files
    std::filesystem::path test_path;
    double val_fraction = 0.2;
    std::size_t train_limit = 0;  // 0 keeps every training row
    std::size_t test_limit = 0;
    std::size_t blobs_per_class = 1000;
    std::size_t blobs_test_per_class = 500;
    std::size_t blobs_dim = 20;
    std::size_t blobs_classes = 2;
    double blobs_separation = 6.0;
    std::uint64_t data_seed = 0;
};

/// Flat key/value settings in canonical (sorted) order.
using Settings = std::map<std::string, std::string>;

struct RunConfig {
    TrainConfig train;
    DataConfig data;
    std::filesystem::path out_dir = "runs";
    Settings effective;  // defaults + file + overrides, after resolution
};

/// Every recognised key with its default value.
const Settings& default_settings();

/// Config-file line of each key, for error messages.
using LineMap = std::map<std::string, std::size_t>;

/// Parses "key = value" lines; '#' starts a comment.
Settings parse_config_text(std::string_view text, LineMap* lines = nullptr);
/// Reads a config file, or the "config" object of a run manifest (JSON).
Settings read_config_file(const std::filesystem::path& path, LineMap* lines = nullptr);

/// Applies "key=value" overrides on top of base; unknown keys throw.
void apply_override(Settings& s, std::string_view assignment);

/// Resolves settings (merged over the defaults) into typed configs.
RunConfig resolve(const Settings& s, const LineMap* lines = nullptr);

/// "key = value" lines for every effective setting.
std::string canonical_text(const Settings& s);

/// 16 hex digits of FNV-1a over the canonical text without the seed.
std::string config_hash(const Settings& s);

struct Splits {
    Dataset train;
    Dataset val;
    Dataset test;
};

/// Loads (or synthesises) the datasets named by cfg. Missing files throw
/// ConfigError before any data is read.
Splits load_splits(const DataConfig& cfg);
void check_data_available(const DataConfig& cfg);

/// Width of the raw features without loading the whole dataset.
std::size_t raw_feature_dim(const DataConfig& cfg);
std::size_t class_count(const DataConfig& cfg);

} // namespace cyclicff
