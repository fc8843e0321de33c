// Copyright 2026 The nqst Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace nqst {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid input: bad shapes, unsupported combinations, malformed files or configs.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A computation failed numerically (divergence, underflow, NaN, non-convergence).
class NumericalError : public Error {
 public:
  using Error::Error;
};

namespace detail {
inline std::function<void(std::string_view)>& warning_sink() {
  static std::function<void(std::string_view)> sink = [](std::string_view msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return sink;
}
}  // namespace detail

/// Routes non-fatal diagnostics. Replace the sink to capture or silence them.
inline void set_warning_handler(std::function<void(std::string_view)> handler) {
  detail::warning_sink() = std::move(handler);
}

inline void warn(std::string_view message) { detail::warning_sink()(message); }

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ConfigError(message);
}

}  // namespace nqst
