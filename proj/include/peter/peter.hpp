// Copyright 2026 The PETER Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "peter/bridge.hpp"
#include "peter/corpus.hpp"
#include "peter/error.hpp"
#include "peter/experiment.hpp"
#include "peter/linear_model.hpp"
#include "peter/metrics.hpp"
#include "peter/pipeline.hpp"
#include "peter/pvp.hpp"
#include "peter/rng.hpp"
#include "peter/schema.hpp"
#include "peter/scorer.hpp"
#include "peter/softmax.hpp"
#include "peter/synthetic.hpp"

namespace peter {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace peter
