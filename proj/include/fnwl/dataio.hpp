// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fnwl/dataio/raw_csv.hpp"
#include "fnwl/dataio/synth.hpp"
#include "fnwl/dataio/windows_file.hpp"
