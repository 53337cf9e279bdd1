// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace fnwl {

inline constexpr const char* kToolName = "fnwl";
inline constexpr const char* kVersion = "0.1.0";

}  // namespace fnwl
