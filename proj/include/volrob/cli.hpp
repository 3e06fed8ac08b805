#pragma once

namespace volrob {

/// Command-line entry point. Subcommands: phantom, train, attack, eval,
/// transfer, freq. Returns 0 on success, 1 when a run completed with partial
/// sample failures, 2 on configuration or usage errors.
int cli_main(int argc, const char* const* argv);

}  // namespace volrob
