// Copyright 2026 The HiFIRec Authors
// SPDX-License-Identifier: Apache-2.0
//
// Umbrella header.

#pragma once

#include "hifirec/checkpoint.hpp"
#include "hifirec/config.hpp"
#include "hifirec/core.hpp"
#include "hifirec/dataset.hpp"
#include "hifirec/eval.hpp"
#include "hifirec/experiments.hpp"
#include "hifirec/graph.hpp"
#include "hifirec/io.hpp"
#include "hifirec/loss.hpp"
#include "hifirec/model.hpp"
#include "hifirec/optim.hpp"
#include "hifirec/report.hpp"
#include "hifirec/synthetic.hpp"
#include "hifirec/trainer.hpp"
