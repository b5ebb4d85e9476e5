#pragma once

namespace uqsim {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kSummarySchemaVersion = 1;

}  // namespace uqsim
