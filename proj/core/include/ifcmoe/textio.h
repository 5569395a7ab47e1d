// Copyright 2026 The ifcmoe Authors
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

#ifndef IFCMOE_TEXTIO_H_
#define IFCMOE_TEXTIO_H_

#include <filesystem>
#include <istream>
#include <string>
#include <string_view>

namespace ifcmoe {

// Shortest decimal form that round-trips to the same double.
std::string format_double(double v);
double parse_double(std::string_view s);
double read_double(std::istream& in);

// Consumes the next whitespace-delimited word and throws DataError unless
// it equals `keyword`.
void expect_keyword(std::istream& in, std::string_view keyword);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace ifcmoe

#endif  // IFCMOE_TEXTIO_H_
