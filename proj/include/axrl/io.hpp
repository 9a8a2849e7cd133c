// Copyright 2026 The axrl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>

namespace axrl::io {

/// 64-bit FNV-1a, chainable through `seed`.
std::uint64_t fnv1a(std::span<const unsigned char> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a(const std::string& text, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

/// Writes through a temporary sibling file and renames it into place.
void write_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer);

std::string read_text(const std::filesystem::path& path);

void put_u32(std::ostream& out, std::uint32_t v);
void put_f64(std::ostream& out, double v);
void put_f32(std::ostream& out, float v);
/// Readers throw FormatError on a short read.
std::uint32_t get_u32(std::istream& in);
double get_f64(std::istream& in);
float get_f32(std::istream& in);

}  // namespace axrl::io
