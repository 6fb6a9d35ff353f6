#pragma once

#include <stdexcept>
#include <string>

namespace lrgas {

struct error : std::runtime_error {
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A requested ball or orbit leaves the region the finite patch can certify.
struct window_overflow_error : error {
    explicit window_overflow_error(const std::string& msg) : error(msg) {}
};

/// No certifiable answer exists on this patch (e.g. repetitivity scan exhausted).
struct not_certifiable_error : error {
    explicit not_certifiable_error(const std::string& msg) : error(msg) {}
};

/// A trajectory left the certified window before finishing its itinerary.
struct escape_error : error {
    escape_error(const std::string& msg, long trajectory)
        : error(msg), trajectory_id(trajectory) {}
    long trajectory_id = -1;
};

struct insufficient_patch_error : error {
    explicit insufficient_patch_error(const std::string& msg) : error(msg) {}
};

struct validation_error : error {
    explicit validation_error(const std::string& msg) : error(msg) {}
};

struct insufficient_signal_error : error {
    explicit insufficient_signal_error(const std::string& msg) : error(msg) {}
};

} // namespace lrgas
