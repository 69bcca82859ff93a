#pragma once

namespace flatpack {

inline constexpr const char* kEngineVersion = "flatpack 1.0.0";
inline constexpr int kProtocolVersion = 1;
inline constexpr int kTrajectoryFormatVersion = 1;

}  // namespace flatpack
