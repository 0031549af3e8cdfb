#pragma once

namespace emband {

const char* version_string();

} // namespace emband
