#ifndef BUBBLESCOPE_ERRORS_HPP
#define BUBBLESCOPE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace bubblescope {

/// Stable machine-readable error codes; the CLI maps these onto its
/// error JSON and exit status 1.
enum class errc {
    malformed_input,
    malformed_price,
    non_monotonic_time,
    too_short,
    beyond_singularity,
    degenerate_design,
    no_fit,
    too_few_drawdowns,
    degenerate_sample,
    no_crashes,
    invalid_argument,
    io_error,
};

inline const char* errc_name(errc c) {
    switch (c) {
        case errc::malformed_input: return "MalformedInput";
        case errc::malformed_price: return "MalformedPrice";
        case errc::non_monotonic_time: return "NonMonotonicTime";
        case errc::too_short: return "TooShort";
        case errc::beyond_singularity: return "BeyondSingularity";
        case errc::degenerate_design: return "DegenerateDesign";
        case errc::no_fit: return "NoFit";
        case errc::too_few_drawdowns: return "TooFewDrawdowns";
        case errc::degenerate_sample: return "DegenerateSample";
        case errc::no_crashes: return "NoCrashes";
        case errc::invalid_argument: return "InvalidArgument";
        case errc::io_error: return "IoError";
    }
    return "Unknown";
}

/// Domain error carrying one of the codes above.
class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    errc code() const noexcept { return code_; }
    const char* code_name() const noexcept { return errc_name(code_); }

private:
    errc code_;
};

[[noreturn]] inline void raise(errc code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace bubblescope

#endif  // BUBBLESCOPE_ERRORS_HPP
