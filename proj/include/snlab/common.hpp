#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace snlab {

using Vec = std::vector<double>;

// Exit-status contract for the CLI: validation/domain problems map to 2,
// numeric/resource failures to 3.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

class DomainError : public std::runtime_error {
public:
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

class ResourceError : public std::runtime_error {
public:
    explicit ResourceError(const std::string& msg) : std::runtime_error(msg) {}
};

// Integration abort: carries the last finite state instead of clamping.
class IntegrationError : public NumericError {
public:
    IntegrationError(const std::string& msg, double t, Vec x, Vec y)
        : NumericError(msg), time(t), last_x(std::move(x)), last_y(std::move(y)) {}
    double time;
    Vec last_x;
    Vec last_y;
};

inline constexpr const char* kArtifactVersion = "0.1.0";

}  // namespace snlab
