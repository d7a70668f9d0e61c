// Copyright (C) 2026 The latcorr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "latcorr/compare.hpp"
#include "latcorr/config.hpp"
#include "latcorr/corruption.hpp"
#include "latcorr/dataset.hpp"
#include "latcorr/denoiser.hpp"
#include "latcorr/diffusion.hpp"
#include "latcorr/error.hpp"
#include "latcorr/grid.hpp"
#include "latcorr/io.hpp"
#include "latcorr/metrics.hpp"
#include "latcorr/mock_server.hpp"
#include "latcorr/pipeline.hpp"
#include "latcorr/rng.hpp"
#include "latcorr/schedule.hpp"
#include "latcorr/wire.hpp"
