#include "emband/version.hpp"

namespace emband {

const char* version_string() { return "0.1.0"; }

} // namespace emband
