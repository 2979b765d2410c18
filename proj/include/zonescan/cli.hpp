#pragma once

namespace zonescan {

// Entry point shared by the zonescan binary and the test harness.
// Exit codes: 0 ok, 1 stage failure, 2 usage error.
int run_cli(int argc, const char* const* argv);

}  // namespace zonescan
