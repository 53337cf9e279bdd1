// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fnwl/preprocessing/butterworth.hpp"
#include "fnwl/preprocessing/filtfilt.hpp"
#include "fnwl/preprocessing/windows.hpp"
