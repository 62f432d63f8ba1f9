// Copyright 2026 The povmlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef POVMLAB_POVMLAB_HPP
#define POVMLAB_POVMLAB_HPP

#include "povmlab/errors.hpp"
#include "povmlab/hilbert.hpp"
#include "povmlab/scheme.hpp"
#include "povmlab/discrete.hpp"
#include "povmlab/continuous.hpp"
#include "povmlab/joint.hpp"
#include "povmlab/classicality.hpp"
#include "povmlab/experiment.hpp"
#include "povmlab/export.hpp"

#endif  // POVMLAB_POVMLAB_HPP
