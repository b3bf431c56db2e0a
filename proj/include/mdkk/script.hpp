#ifndef MDKK_SCRIPT_HPP
#define MDKK_SCRIPT_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "mdkk/error.hpp"

namespace mdkk
{

struct Command
{
    std::string name;
    std::vector<std::string> args;
    /// 1-based line where the command starts.
    std::size_t line = 0;

    bool operator==(const Command& other) const { return name == other.name && args == other.args; }
};

struct Script
{
    std::vector<Command> commands;

    /// Compares the token streams only (line numbers are ignored).
    bool operator==(const Script& other) const { return commands == other.commands; }
};

class ParseError : public Error
{
public:
    ParseError(std::size_t line, const std::string& message);

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Tokenizes an input script. '#' starts a comment; a trailing '&' joins
/// the next line. Each command is checked for a known name, its arity and
/// the shape of its numeric arguments.
Script parse_script(const std::string& text);

/// One command per line, tokens separated by single spaces.
std::string serialize(const Script& script);

/// Names accepted by parse_script, sorted.
std::vector<std::string> known_commands();

/// Commands that configure state for later commands (styles, settings), as
/// opposed to immediate ones that act when reached (create_atoms, run, ...).
bool is_persistent(const std::string& command);

/// Strict number parsing shared by the parser and the driver.
bool is_integer(const std::string& token);
bool is_number(const std::string& token);
long long to_integer(const std::string& token, std::size_t line);
double to_number(const std::string& token, std::size_t line);

/// Levenshtein distance, used for near-match suggestions.
std::size_t edit_distance(const std::string& a, const std::string& b);

/// Up to `limit` candidates closest to `name`, nearest first.
std::vector<std::string> near_matches(const std::string& name, const std::vector<std::string>& candidates,
                                      std::size_t limit = 3);

} // namespace mdkk

#endif
