#pragma once

#include <ostream>

namespace cpfts {

/// Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric or
/// calibration failure.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cpfts
