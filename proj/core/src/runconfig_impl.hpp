#pragma once

#include <nlohmann/json.hpp>

#include "scorefuse/cli.hpp"

namespace scorefuse::cli {

struct RunConfig::Impl {
    nlohmann::json j;
};

}  // namespace scorefuse::cli
