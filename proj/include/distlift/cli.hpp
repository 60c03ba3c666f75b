#pragma once

namespace distlift::cli {

// Full command-line entry point.  Returns 0 on success, 1 on usage errors
// (synopsis goes to stderr), 2 on runtime or numeric failures.
int cli_main(int argc, char** argv);

}  // namespace distlift::cli
