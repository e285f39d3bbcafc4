// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef IIACHECK_VERSION_HPP
#define IIACHECK_VERSION_HPP

namespace iia {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace iia

#endif  // IIACHECK_VERSION_HPP
