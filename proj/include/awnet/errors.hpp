#pragma once

#include <stdexcept>
#include <string>

namespace awnet {

/// File / container format failures, with a machine-checkable kind.
class io_error : public std::runtime_error {
public:
    enum class kind {
        open_failed,
        bad_magic,
        bad_header,
        truncated,
        trailing_data,
        bad_version,
        write_failed,
    };

    io_error(kind k, const std::string& msg)
        : std::runtime_error(prefix(k) + ": " + msg), kind_(k) {}

    kind what_kind() const noexcept { return kind_; }

    static std::string prefix(kind k) {
        switch (k) {
            case kind::open_failed:   return "open failed";
            case kind::bad_magic:     return "bad magic";
            case kind::bad_header:    return "bad header";
            case kind::truncated:     return "truncated payload";
            case kind::trailing_data: return "trailing data";
            case kind::bad_version:   return "unsupported version";
            case kind::write_failed:  return "write failed";
        }
        return "io error";
    }

private:
    kind kind_;
};

/// Configuration file problems: syntax, unknown keys, bad values.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& msg)
        : std::runtime_error("config: " + msg) {}
};

/// Contract violations on operation inputs (dims mismatch, bad index, ...).
class invalid_argument_error : public std::invalid_argument {
public:
    explicit invalid_argument_error(const std::string& msg)
        : std::invalid_argument(msg) {}
};

} // namespace awnet
