// Copyright 2026 The Legimod Authors
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

// Umbrella header.

#ifndef LEGIMOD_LEGIMOD_HPP_
#define LEGIMOD_LEGIMOD_HPP_

#include "legimod/diffusion.hpp"
#include "legimod/env.hpp"
#include "legimod/errors.hpp"
#include "legimod/eval.hpp"
#include "legimod/geometry.hpp"
#include "legimod/guided_policy.hpp"
#include "legimod/io.hpp"
#include "legimod/ipf.hpp"
#include "legimod/path_diffuser.hpp"
#include "legimod/qd_dataset.hpp"
#include "legimod/scoring.hpp"

#endif  // LEGIMOD_LEGIMOD_HPP_
