#ifndef MDKK_REGISTRY_HPP
#define MDKK_REGISTRY_HPP

#include <map>
#include <string>
#include <vector>

#include "mdkk/error.hpp"
#include "mdkk/script.hpp"

namespace mdkk
{

class StyleError : public Error
{
public:
    using Error::Error;
};

//---------------------------------------------------------------------------//
/*!
  \brief Name -> factory map with suffix dispatch.

  resolve(name, suffix):
    - suffix set and "name/suffix" registered: the suffixed variant;
    - otherwise "name" registered: that style (this covers explicitly
      suffixed names and the fallback to a base style with no variant);
    - otherwise StyleError listing the nearest registered names.
*/
template <class Factory>
class StyleRegistry
{
public:
    void add(const std::string& name, Factory factory)
    {
        if (!factories_.emplace(name, std::move(factory)).second) {
            throw StyleError("style '" + name + "' registered twice");
        }
    }

    bool contains(const std::string& name) const { return factories_.count(name) != 0; }

    std::vector<std::string> names() const
    {
        std::vector<std::string> out;
        for (const auto& [name, f] : factories_) {
            out.push_back(name);
        }
        return out;
    }

    std::string resolve_name(const std::string& name, const std::string& suffix) const
    {
        if (!suffix.empty() && contains(name + "/" + suffix)) {
            return name + "/" + suffix;
        }
        if (contains(name)) {
            return name;
        }
        std::string msg = "unknown style '" + name + "'";
        const auto near = near_matches(name, names());
        if (!near.empty()) {
            msg += "; near matches:";
            for (const auto& n : near) {
                msg += " " + n;
            }
        }
        throw StyleError(msg);
    }

    const Factory& resolve(const std::string& name, const std::string& suffix) const
    {
        return factories_.at(resolve_name(name, suffix));
    }

private:
    std::map<std::string, Factory> factories_;
};

} // namespace mdkk

#endif
