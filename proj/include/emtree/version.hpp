#pragma once

namespace emtree {

#ifdef EMTREE_VERSION
inline constexpr const char* kVersion = EMTREE_VERSION;
#else
inline constexpr const char* kVersion = "dev";
#endif

}  // namespace emtree
