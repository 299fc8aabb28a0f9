#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ure {

enum class ErrorCode {
    kInvalidArgument,
    kShapeMismatch,
    kNonFinite,
    kBadMagic,
    kTruncated,
    kIo,
    kConfig,
    kMissingPrerequisite,
    kInternal,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries a code so callers (notably the
/// CLI, which maps codes onto exit statuses) can branch without parsing text.
class Error : public std::runtime_error {
   public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

   private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, ErrorCode code, const std::string& what) {
    if (!condition) {
        fail(code, what);
    }
}

}  // namespace ure
