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

#ifndef BUS_TREE_IO_HPP_
#define BUS_TREE_IO_HPP_

#include <cstdint>
#include <string>
#include <string_view>

#include "bus/tree.hpp"

namespace bus {

// Tree files are JSON lines: a header record (format tag, version, build
// params, attribute order, node count), one record per node in id order,
// and a trailing checksum record covering every preceding byte.
inline constexpr std::string_view kTreeFormat = "bus-tree";
inline constexpr int kTreeFormatVersion = 1;

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

// Appends {"checksum":"fnv1a64:<16 hex digits>"} for `body`.
std::string checksum_line(std::string_view body);
// Splits off and verifies the trailing checksum record; returns the body.
// Throws FormatError.
std::string_view verify_checksum(std::string_view text, std::string_view what);

std::string serialize_tree(const BusTree& tree);
// Throws FormatError on any version, checksum or structural problem; never
// returns a partial tree.
BusTree parse_tree(std::string_view text);

void save_tree(const BusTree& tree, const std::string& path);
BusTree load_tree(const std::string& path);

// Whole-file read; throws Error when the file cannot be opened.
std::string read_file(const std::string& path);
// Writes via a temporary file and rename.
void write_file_atomic(const std::string& path, std::string_view contents);

}  // namespace bus

#endif  // BUS_TREE_IO_HPP_
