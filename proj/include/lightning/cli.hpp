#pragma once

#include <ostream>

namespace lightning {

/// Entry point of lightning-sim. Returns 0 on success, 1 on a usage error and
/// 2 when the run itself fails.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace lightning
