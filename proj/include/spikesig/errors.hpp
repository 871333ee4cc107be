#pragma once

#include <stdexcept>
#include <string>

namespace spikesig {

// Every error raised by the library derives from `error`. The CLI maps the
// category onto an exit code (see exit_code()).
enum class error_kind {
	config,      // bad configuration values or unknown keys
	format,      // malformed input file
	unsupported, // well-formed input the library does not handle
	input,       // shape mismatches, missing data, empty classes
	io,          // filesystem failures
	degenerate,  // silent clips, all-zero weight columns, flat scalers
	numeric,     // NaN / inf encountered during simulation
};

class error : public std::runtime_error {
public:
	error(error_kind kind, const std::string &what)
		: std::runtime_error(what), kind_(kind) {}

	error_kind kind() const noexcept { return kind_; }

private:
	error_kind kind_;
};

struct config_error : error {
	explicit config_error(const std::string &w) : error(error_kind::config, w) {}
};
struct format_error : error {
	explicit format_error(const std::string &w) : error(error_kind::format, w) {}
};
struct unsupported_format_error : error {
	explicit unsupported_format_error(const std::string &w) : error(error_kind::unsupported, w) {}
};
struct input_error : error {
	explicit input_error(const std::string &w) : error(error_kind::input, w) {}
};
struct io_error : error {
	explicit io_error(const std::string &w) : error(error_kind::io, w) {}
};
struct degenerate_error : error {
	explicit degenerate_error(const std::string &w) : error(error_kind::degenerate, w) {}
};
struct numeric_error : error {
	explicit numeric_error(const std::string &w) : error(error_kind::numeric, w) {}
};

// 0 success, 2 config error, 3 data error, 4 numeric/degenerate error.
inline int exit_code(error_kind kind) noexcept
{
	switch (kind) {
	case error_kind::config:
		return 2;
	case error_kind::degenerate:
	case error_kind::numeric:
		return 4;
	default:
		return 3;
	}
}

} // namespace spikesig
