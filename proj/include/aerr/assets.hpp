#pragma once

#include <filesystem>

namespace aerr {

/// Bundled assets (scenarios, prompts, priors, configs) of the source tree.
inline std::filesystem::path asset_dir() { return AERR_ASSET_DIR; }

}  // namespace aerr
