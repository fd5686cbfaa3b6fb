#pragma once

namespace semiclassic {

// Library and report-schema version (semantic versioning; the CLI report's
// "version" field follows the schema, which currently tracks the library).
inline constexpr const char* kVersion = "1.0.0";

}  // namespace semiclassic
