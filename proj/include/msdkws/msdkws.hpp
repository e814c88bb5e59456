// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The msdkws Authors
#pragma once

#include "msdkws/autograd.hpp"
#include "msdkws/config.hpp"
#include "msdkws/container.hpp"
#include "msdkws/data.hpp"
#include "msdkws/decoder.hpp"
#include "msdkws/error.hpp"
#include "msdkws/eval.hpp"
#include "msdkws/losses.hpp"
#include "msdkws/model.hpp"
#include "msdkws/optim.hpp"
#include "msdkws/pipeline.hpp"
#include "msdkws/rng.hpp"
#include "msdkws/tensor.hpp"
#include "msdkws/trainer.hpp"
