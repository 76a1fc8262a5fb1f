#pragma once

#include "memsde/experiments.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace memsde {

inline constexpr const char* kSchemaVersion = "mem-sde/1";

/// "%.17g"; non-finite values become "nan", "inf" or "-inf".
std::string format_double(double v);

/// Deterministic JSON text: keys in insertion order, two-space indent, floating-point
/// numbers with 17 significant digits, non-finite numbers as null, trailing newline.
std::string dump_json(const Json& j);

/// Writes `content` to a temporary file next to `path` and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Header row plus rows of numbers.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::string to_string() const;
};

/// tau, w1, se, n_effective
CsvTable errors_table(const std::vector<double>& taus, const std::vector<double>& errors,
                      const std::vector<double>& std_errors, const std::vector<std::size_t>& n_effective);

/// Header "model,slope,intercept,residual", one row per fitted model ("logtau",
/// "logtau_logcorrected"). Models that could not be fitted are omitted.
std::string rates_csv(const std::optional<RateFit>& logtau, const std::optional<RateFit>& loglog);

/// Output directory that records what it writes and finishes with manifest.json.
class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path dir);

  const std::filesystem::path& path() const noexcept { return dir_; }
  void write(const std::string& name, const std::string& content);
  void write_json(const std::string& name, const Json& j);
  void write_csv(const std::string& name, const CsvTable& table);
  /// Writes manifest.json listing every file in the directory (itself included) and the config.
  void finish(const Json& effective_config);

  const std::vector<std::string>& files() const noexcept { return files_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> files_;
};

}  // namespace memsde
