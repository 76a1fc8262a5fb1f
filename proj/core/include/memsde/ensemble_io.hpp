#pragma once

#include "memsde/simulate.hpp"

#include <filesystem>
#include <string>

namespace memsde {

/// Header "id,diverged_step,x_1,...,x_d"; diverged_step is -1 for finite trajectories.
std::string ensemble_to_csv(const Ensemble& e);
Ensemble ensemble_from_csv(const std::string& text);

/// "MEM1", then M and d as little-endian uint64, then M·d little-endian doubles by row.
/// Divergence steps are not stored; non-finite rows read back as diverged at step 0.
std::string ensemble_to_binary(const Ensemble& e);
Ensemble ensemble_from_binary(const std::string& bytes);

void write_ensemble_csv(const std::filesystem::path& path, const Ensemble& e);
void write_ensemble_binary(const std::filesystem::path& path, const Ensemble& e);
Ensemble read_ensemble_csv(const std::filesystem::path& path);
Ensemble read_ensemble_binary(const std::filesystem::path& path);

}  // namespace memsde
