#pragma once

#include <cstddef>
#include <string>

#include <json.hpp>

#include "kriss/mentions.hpp"

namespace kriss::detail {

using ojson = nlohmann::ordered_json;

ojson mention_to_json(const MentionExample& m);
/// `where` prefixes error messages (e.g. "line 3").
MentionExample mention_from_json(const nlohmann::json& obj, const std::string& where);

nlohmann::json parse_json_line(std::string_view line, std::size_t line_no);

}  // namespace kriss::detail
