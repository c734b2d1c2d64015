/*
   Copyright 2026 The pcs Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <stdexcept>
#include <string>

namespace pcs {

/// Bad arguments, malformed files, or inputs that violate a documented
/// precondition. The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Likelihood evaluated at a point outside its domain (y_j > 0 with a zero
/// intensity after flooring).
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// The solver produced a non-finite objective. Exit code 3 in the CLI.
class SolverAbort : public std::runtime_error {
public:
    explicit SolverAbort(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {
inline void require(bool cond, const std::string& msg)
{
    if (!cond) throw ValidationError(msg);
}
} // namespace detail

} // namespace pcs
