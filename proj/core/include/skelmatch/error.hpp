#pragma once

#include <stdexcept>
#include <string>

namespace skelmatch {

// Error category, used by the CLI to pick an exit code:
//   kIo -> 2, kParse -> 2, kValidation -> 3, kSolver -> 4.
enum class ErrorKind {
    kIo,          // unreadable/unwritable files, bad magic, truncation
    kParse,       // malformed text/JSON input (carries a line number where known)
    kValidation,  // shape mismatches, bad parameters, bad config
    kSolver,      // solver failure (no convergence, infeasible marginals)
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline Error io_error(std::string msg) { return Error(ErrorKind::kIo, std::move(msg)); }
inline Error parse_error(std::string msg) { return Error(ErrorKind::kParse, std::move(msg)); }
inline Error validation_error(std::string msg) { return Error(ErrorKind::kValidation, std::move(msg)); }
inline Error solver_error(std::string msg) { return Error(ErrorKind::kSolver, std::move(msg)); }

}  // namespace skelmatch
