#ifndef MDKK_TESTS_REGISTRY_TABLE_HPP
#define MDKK_TESTS_REGISTRY_TABLE_HPP

#include <string>
#include <vector>

#include "mdkk/registry.hpp"

namespace oracle
{

struct SuffixRow
{
    const char* request;
    const char* suffix;
    bool base;    // "lj/cut" registered
    bool variant; // "lj/cut/opt" registered
    const char* expect; // "" = StyleError
};

inline const std::vector<SuffixRow>& suffix_truth_table()
{
    static const std::vector<SuffixRow> table = {
        {"lj/cut", "", true, true, "lj/cut"},
        {"lj/cut", "", true, false, "lj/cut"},
        {"lj/cut", "", false, true, ""},
        {"lj/cut", "", false, false, ""},
        {"lj/cut", "opt", true, true, "lj/cut/opt"},
        {"lj/cut", "opt", true, false, "lj/cut"},
        {"lj/cut", "opt", false, true, "lj/cut/opt"},
        {"lj/cut", "opt", false, false, ""},
        {"lj/cut/opt", "", true, true, "lj/cut/opt"},
        {"lj/cut/opt", "", true, false, ""},
        {"lj/cut/opt", "", false, true, "lj/cut/opt"},
        {"lj/cut/opt", "", false, false, ""},
        {"lj/cut/opt", "opt", true, true, "lj/cut/opt"},
        {"lj/cut/opt", "opt", true, false, ""},
        {"lj/cut/opt", "opt", false, true, "lj/cut/opt"},
        {"lj/cut/opt", "opt", false, false, ""},
        {"lj/cut/opt", "kk", true, true, "lj/cut/opt"},
        {"lj/cut", "kk", true, true, "lj/cut"},
    };
    return table;
}

/// Registry with "eam" and the base/variant entries of the row.
inline mdkk::StyleRegistry<int> truth_table_registry(const SuffixRow& row)
{
    mdkk::StyleRegistry<int> reg;
    reg.add("eam", 0);
    if (row.base) {
        reg.add("lj/cut", 1);
    }
    if (row.variant) {
        reg.add("lj/cut/opt", 2);
    }
    return reg;
}

/// True if resolution agrees with the row's expectation.
inline bool check_suffix_row(const SuffixRow& row)
{
    const auto reg = truth_table_registry(row);
    const std::string expect = row.expect;
    try {
        const std::string got = reg.resolve_name(row.request, row.suffix);
        return got == expect && reg.resolve(row.request, row.suffix) == (expect == "lj/cut" ? 1 : 2);
    } catch (const mdkk::StyleError&) {
        return expect.empty();
    }
}

} // namespace oracle

#endif
