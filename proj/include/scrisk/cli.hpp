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

#ifndef SCRISK__CLI_HPP_
#define SCRISK__CLI_HPP_

#include <ostream>
#include <string>
#include <vector>

namespace scrisk::cli
{

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigInvalid = 2,
  kIoFailure = 3,
  kNonFiniteLoss = 4,
};

/// Runs `scrisk <command> ...`; args excludes the program name.
int run(const std::vector<std::string> & args, std::ostream & out, std::ostream & err);

/// Worker threads: SCRISK_THREADS if set, else the hardware concurrency.
unsigned thread_budget();

}  // namespace scrisk::cli

#endif  // SCRISK__CLI_HPP_
