#pragma once

#include <filesystem>
#include <string>

#include "regard_audit/sentiment.hpp"
#include "regard_audit/text.hpp"

namespace test_support {

inline std::string data_path(const std::string& relative) {
    return (std::filesystem::path(REGARD_AUDIT_DATA_DIR) / relative).string();
}

inline std::string fixture(const std::string& name) { return data_path("fixtures/" + name); }

inline const regard_audit::sentiment::Analyzer& default_analyzer() {
    static const regard_audit::sentiment::Analyzer analyzer(
        regard_audit::sentiment::load_resources(regard_audit::sentiment::ResourcePaths::in_directory(data_path("lexicon"))));
    return analyzer;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("regard_audit_" + tag + "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

} // namespace test_support
