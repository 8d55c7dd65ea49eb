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

#ifndef ISVC_ERRORS_H_
#define ISVC_ERRORS_H_

#include <stdexcept>
#include <string>

namespace isvc {

// Raised when an argument is outside the range an operation accepts.
class InvalidParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a parameter schedule (or a baseline calibration) cannot meet
// the requested privacy budget. Carries the first offending stage and the
// amount by which the cumulative epsilon exceeds the budget.
class InfeasibleScheduleError : public std::runtime_error {
 public:
  InfeasibleScheduleError(const std::string& what, int stage, double overshoot)
      : std::runtime_error(what), stage_(stage), overshoot_(overshoot) {}

  int stage() const { return stage_; }
  double overshoot() const { return overshoot_; }

 private:
  int stage_;
  double overshoot_;
};

}  // namespace isvc

#endif  // ISVC_ERRORS_H_
