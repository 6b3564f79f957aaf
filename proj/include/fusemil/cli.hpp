#pragma once

namespace fusemil::cli {

/// Entry point behind the fusemil binary. Exit codes: 0 success, 2 config
/// error, 3 data error, 4 numerical error.
int run(int argc, const char* const* argv);

}  // namespace fusemil::cli
