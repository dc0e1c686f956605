/*
 * Copyright 2026 The pxattack Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#ifndef PXATTACK_PXATTACK_HPP_
#define PXATTACK_PXATTACK_HPP_

#include "pxattack/attack.hpp"
#include "pxattack/baselines.hpp"
#include "pxattack/classifier.hpp"
#include "pxattack/error.hpp"
#include "pxattack/external.hpp"
#include "pxattack/harness.hpp"
#include "pxattack/image.hpp"
#include "pxattack/metrics.hpp"
#include "pxattack/png.hpp"
#include "pxattack/protocol.hpp"
#include "pxattack/rng.hpp"
#include "pxattack/rtf.hpp"
#include "pxattack/superpixel.hpp"

#endif  // PXATTACK_PXATTACK_HPP_
