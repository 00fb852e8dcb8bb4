// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "lgttp/adaptation.hpp"
#include "lgttp/error.hpp"
#include "lgttp/harness.hpp"
#include "lgttp/io.hpp"
#include "lgttp/planner.hpp"
#include "lgttp/query_parser.hpp"
#include "lgttp/relevance.hpp"
#include "lgttp/rng.hpp"
#include "lgttp/trainer.hpp"
#include "lgttp/version.hpp"
#include "lgttp/weighting.hpp"
