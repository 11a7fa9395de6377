#pragma once

namespace lossdisc::cli {

/// Entry point of the command-line tool (also callable in-process by tests).
/// Exit codes: 0 success, 2 configuration / usage error, 3 numerical failure.
/// Errors are reported on stderr as single lines of the form
/// "error: <config|numeric|internal>: <message>".
int run(int argc, const char* const* argv);

}  // namespace lossdisc::cli
