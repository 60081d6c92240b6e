// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The fastcurv Authors

#pragma once

#include "fastcurv/backends.hpp"
#include "fastcurv/baselines.hpp"
#include "fastcurv/bytes.hpp"
#include "fastcurv/curvature.hpp"
#include "fastcurv/desk.hpp"
#include "fastcurv/distributions.hpp"
#include "fastcurv/error.hpp"
#include "fastcurv/harness.hpp"
#include "fastcurv/lm.hpp"
#include "fastcurv/logits_file.hpp"
#include "fastcurv/numeric.hpp"
#include "fastcurv/prose.hpp"
#include "fastcurv/remote.hpp"
#include "fastcurv/report.hpp"
