#pragma once

#include <json.hpp>

namespace hita {
using Json = nlohmann::json;
}
