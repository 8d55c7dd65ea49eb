//
// Copyright 2026 The isvc Authors
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
//

// Command-line front end. RunCli is the whole program minus process setup,
// so tests can drive it with in-memory streams.

#ifndef ISVC_CLI_H_
#define ISVC_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace isvc {

enum ExitCode {
  kExitOk = 0,
  kExitUsage = 1,
  kExitInfeasible = 2,
  kExitPropertyFailure = 3,
  kExitIo = 4,
};

// Accepts a decimal ("1e-6"), "2^-N" or "e^-N" (N a non-negative decimal).
// 2^-N with integral N is exact. Throws InvalidParameterError.
double ParseDelta(const std::string& text);

// Environment variable holding the default worker count; --threads wins.
inline constexpr char kThreadsEnv[] = "ISVC_THREADS";

// args excludes the program name.
int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err);

}  // namespace isvc

#endif  // ISVC_CLI_H_
