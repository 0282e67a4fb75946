// Copyright 2026 The scrisk Authors
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

#ifndef SCRISK__ERRORS_HPP_
#define SCRISK__ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace scrisk
{

/// Base class of every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

#define SCRISK_DEFINE_ERROR(Name)       \
  class Name : public Error             \
  {                                     \
  public:                               \
    using Error::Error;                 \
  }

// kinematics
SCRISK_DEFINE_ERROR(InvalidState);
SCRISK_DEFINE_ERROR(CenterSingularity);
SCRISK_DEFINE_ERROR(InsufficientHistory);
SCRISK_DEFINE_ERROR(FrameRateMismatch);

// scenario generation
SCRISK_DEFINE_ERROR(NoCandidate);
SCRISK_DEFINE_ERROR(TriggerFailed);
SCRISK_DEFINE_ERROR(AnomalousEpisode);

// numeric core and model
SCRISK_DEFINE_ERROR(ShapeError);
SCRISK_DEFINE_ERROR(NotScalar);
SCRISK_DEFINE_ERROR(MissingRisk);
SCRISK_DEFINE_ERROR(ConfigMismatch);
SCRISK_DEFINE_ERROR(EmptyDataset);

// persistence and configuration
SCRISK_DEFINE_ERROR(ConfigError);
SCRISK_DEFINE_ERROR(IoError);
SCRISK_DEFINE_ERROR(FormatError);

#undef SCRISK_DEFINE_ERROR

}  // namespace scrisk

#endif  // SCRISK__ERRORS_HPP_
