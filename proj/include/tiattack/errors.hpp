#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tia {

/// Malformed binary input (IDX, NPY). Carries the byte offset where parsing failed.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
    std::uint64_t offset() const { return offset_; }

private:
    std::uint64_t offset_;
};

/// Missing files, unknown model ids, invalid plan fields.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class DivergedError : public std::runtime_error {
public:
    explicit DivergedError(int epoch)
        : std::runtime_error("training diverged: non-finite loss in epoch " + std::to_string(epoch)),
          epoch_(epoch) {}
    int epoch() const { return epoch_; }

private:
    int epoch_;
};

}  // namespace tia
