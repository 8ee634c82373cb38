#pragma once

namespace hint {

// Full command-line entry point (parse, dispatch, map exceptions to exit
// codes). Kept out of main() so tests can invoke subcommands in-process.
// Exit codes: 0 ok, 2 config/usage, 3 data, 4 numeric divergence, 1 other.
int cli_run(int argc, const char* const* argv);

} // namespace hint
