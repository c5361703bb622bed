#pragma once

namespace dapolab_cli {

// Runs the built-in invariant and oracle checks, printing one line per
// check. Returns 0 when everything holds, 1 otherwise.
int run_selftest();

}  // namespace dapolab_cli
