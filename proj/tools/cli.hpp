/*
 * Copyright 2026 The bus-segmentation Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef BUS_TOOLS_CLI_HPP_
#define BUS_TOOLS_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace bus::cli {

// Runs one `bus` invocation. `args` excludes the program name. Returns the
// process exit status; diagnostics go to `err`.
int run_command(const std::vector<std::string>& args, std::ostream& out,
                std::ostream& err);

}  // namespace bus::cli

#endif  // BUS_TOOLS_CLI_HPP_
