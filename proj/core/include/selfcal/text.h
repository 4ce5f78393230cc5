/*
 * Copyright 2026 The selfcal Authors.
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

#ifndef SELFCAL_TEXT_H_
#define SELFCAL_TEXT_H_

#include <string>
#include <string_view>
#include <vector>

namespace selfcal {

// Whitespace tokenization. Every component that reads or rewrites text goes
// through this so token positions agree between the featurizer, the
// augmenters and the attacker.
std::vector<std::string> Tokenize(std::string_view text);

std::string JoinTokens(const std::vector<std::string>& tokens);

std::string ToLower(std::string_view text);

}  // namespace selfcal

#endif  // SELFCAL_TEXT_H_
