// Copyright 2026 The fluxmem Authors.
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

#include "fluxmem/baselines.hpp"
#include "fluxmem/memory_engine.hpp"
#include "fluxmem/otsu.hpp"
#include "fluxmem/parallel.hpp"
#include "fluxmem/random.hpp"
#include "fluxmem/scoring.hpp"
#include "fluxmem/sdc.hpp"
#include "fluxmem/stream_format.hpp"
#include "fluxmem/synth_stream.hpp"
#include "fluxmem/tas.hpp"
#include "fluxmem/token_model.hpp"
