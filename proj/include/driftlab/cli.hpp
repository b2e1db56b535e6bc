#pragma once

namespace driftlab {

// Full command-line entry point: parses `driftlab <command> <config-file>`, runs the
// command, writes its CSV outputs plus manifest.json under the config's output_dir
// (overridable through DRIFTLAB_OUTPUT_DIR), and returns the process exit code:
// 0 success, 1 runtime failure, 2 usage or config error.
int run_cli(int argc, char** argv);

}  // namespace driftlab
