// SPDX-License-Identifier: Apache-2.0

#ifndef MMSL_MMSL_HPP
#define MMSL_MMSL_HPP

#include "mmsl/dataset.hpp"
#include "mmsl/errors.hpp"
#include "mmsl/eval.hpp"
#include "mmsl/image.hpp"
#include "mmsl/image_io.hpp"
#include "mmsl/ops.hpp"
#include "mmsl/parallel.hpp"
#include "mmsl/pipeline.hpp"
#include "mmsl/random.hpp"
#include "mmsl/runner.hpp"

#endif  // MMSL_MMSL_HPP
