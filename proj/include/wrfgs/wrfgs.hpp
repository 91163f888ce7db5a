// Copyright Contributors to the wrfgs Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "wrfgs/checkpoint.hpp"
#include "wrfgs/cli.hpp"
#include "wrfgs/complex.hpp"
#include "wrfgs/config.hpp"
#include "wrfgs/dataset.hpp"
#include "wrfgs/em_core.hpp"
#include "wrfgs/encoding.hpp"
#include "wrfgs/geometry.hpp"
#include "wrfgs/io.hpp"
#include "wrfgs/mlp.hpp"
#include "wrfgs/oracle.hpp"
#include "wrfgs/parallel.hpp"
#include "wrfgs/pipeline.hpp"
#include "wrfgs/projection.hpp"
#include "wrfgs/rng.hpp"
#include "wrfgs/scene.hpp"
#include "wrfgs/splat.hpp"
#include "wrfgs/ssim.hpp"
#include "wrfgs/tasks.hpp"
#include "wrfgs/train.hpp"
