#ifndef MDKK_ERROR_HPP
#define MDKK_ERROR_HPP

#include <stdexcept>
#include <string>

namespace mdkk
{

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Invalid user-supplied configuration (bad extents, parameters, etc.).
class ConfigError : public Error
{
public:
    using Error::Error;
};

} // namespace mdkk

#endif
