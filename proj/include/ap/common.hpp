#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace ap {

// Thrown when a caller violates a documented precondition.
class ContractError : public std::logic_error {
  public:
    explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

// Thrown for invalid user-supplied configuration.
class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {
[[noreturn]] inline void raise_contract(const char* expr, const char* file, int line,
                                        const std::string& msg) {
    std::ostringstream os;
    os << "contract violation: " << msg << " [" << expr << " at " << file << ":" << line << "]";
    throw ContractError(os.str());
}
}  // namespace detail

}  // namespace ap

#define AP_CHECK(cond, msg)                                            \
    do {                                                               \
        if (!(cond)) {                                                 \
            ::ap::detail::raise_contract(#cond, __FILE__, __LINE__, (msg)); \
        }                                                              \
    } while (0)
