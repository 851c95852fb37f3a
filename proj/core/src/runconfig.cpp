#include "scorefuse/cli.hpp"

#include <cstdlib>
#include <fstream>

#include "runconfig_impl.hpp"

namespace scorefuse::cli {

namespace {

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

nlohmann::json parse_json(const std::string& text, const std::string& origin) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("cannot parse " + origin + ": " + e.what());
    }
}

void apply_overrides(nlohmann::json& j, const Overrides& overrides) {
    if (const char* env = std::getenv("SCOREFUSE_SEED")) {
        try {
            j["seed"] = static_cast<std::uint64_t>(std::stoull(env));
        } catch (const std::exception&) {
            throw ConfigError(std::string("SCOREFUSE_SEED is not an integer: ") + env);
        }
    }
    if (const char* env = std::getenv("SCOREFUSE_OUT")) j["output"] = std::string(env);
    if (overrides.seed) j["seed"] = *overrides.seed;
    if (overrides.out) j["output"] = *overrides.out;
    if (overrides.members) j["members"] = *overrides.members;
    if (overrides.steps) j["sampler"]["steps"] = *overrides.steps;
    if (overrides.threads) j["threads"] = *overrides.threads;
    if (overrides.method) j["fuse"]["method"] = *overrides.method;
}

}  // namespace

RunConfig RunConfig::from_file(const std::filesystem::path& path, const Overrides& overrides) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path.string());
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return from_json_text(text, overrides);
}

RunConfig RunConfig::from_json_text(const std::string& text, const Overrides& overrides) {
    nlohmann::json j = parse_json(text, "run config");
    if (!j.is_object()) throw ConfigError("run config must be a JSON object");
    // A manifest embeds the resolved config it was produced from.
    if (j.contains("config") && j.contains("config_hash")) {
        j = j["config"];
    }
    apply_overrides(j, overrides);
    auto impl = std::make_shared<Impl>();
    impl->j = std::move(j);
    return RunConfig(std::move(impl));
}

std::string RunConfig::canonical_text() const { return impl_->j.dump(); }

std::string RunConfig::hash() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a(canonical_text())));
    return buf;
}

std::uint64_t RunConfig::seed() const {
    return impl_->j.value("seed", static_cast<std::uint64_t>(0));
}

std::filesystem::path RunConfig::output_dir() const {
    if (!impl_->j.contains("output")) {
        throw ConfigError("run config needs an \"output\" directory (or --out)");
    }
    return std::filesystem::path(impl_->j["output"].get<std::string>());
}

int RunConfig::members() const { return impl_->j.value("members", 8); }

int RunConfig::threads() const { return impl_->j.value("threads", 1); }

void run_command(const std::string& command, const RunConfig& config) {
    if (command == "train") {
        cmd_train(config);
    } else if (command == "sample") {
        cmd_sample(config);
    } else if (command == "superres") {
        cmd_superres(config);
    } else if (command == "fuse") {
        cmd_fuse(config);
    } else if (command == "diag") {
        cmd_diag(config);
    } else {
        throw ConfigError("unknown command: " + command);
    }
}

}  // namespace scorefuse::cli
