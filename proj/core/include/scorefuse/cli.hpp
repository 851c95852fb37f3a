#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace scorefuse::cli {

/// Configuration or referenced-file problems; the CLI maps these to exit 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Command-line overrides. Resolution order: config file < SCOREFUSE_* env
/// (seed, output dir) < explicit flags.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> members;
    std::optional<int> steps;
    std::optional<int> threads;
    std::optional<std::string> method;
};

/// Resolved run configuration, hashed for the manifests. Accepts either a
/// plain config file or a previously written run manifest (whose embedded
/// config is then used, making every run replayable byte for byte).
class RunConfig {
public:
    static RunConfig from_file(const std::filesystem::path& path, const Overrides& overrides);
    static RunConfig from_json_text(const std::string& text, const Overrides& overrides);

    std::string canonical_text() const;
    std::string hash() const;

    std::uint64_t seed() const;
    std::filesystem::path output_dir() const;
    int members() const;
    int threads() const;

    struct Impl;
    const Impl& impl() const { return *impl_; }

private:
    explicit RunConfig(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<const Impl> impl_;
};

inline constexpr const char* kVersion = "0.1.0";

// Subcommand entry points. Each writes its outputs plus manifest.json under
// the configured output directory. Errors surface as exceptions:
// ConfigError for configuration/file problems, anything else is a runtime
// failure (exit 1 in the CLI).
void cmd_train(const RunConfig& config);
void cmd_sample(const RunConfig& config);
void cmd_superres(const RunConfig& config);
void cmd_fuse(const RunConfig& config);
void cmd_diag(const RunConfig& config);

/// Dispatch by name ("train", "sample", "superres", "fuse", "diag").
void run_command(const std::string& command, const RunConfig& config);

}  // namespace scorefuse::cli
