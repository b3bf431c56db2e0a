#include "mdkk/script.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <sstream>

#include "mdkk/memspace.hpp"

namespace mdkk
{

ParseError::ParseError(std::size_t line, const std::string& message)
    : Error("line " + std::to_string(line) + ": " + message), line_(line)
{
}

bool is_integer(const std::string& token)
{
    std::size_t start = (!token.empty() && (token[0] == '-' || token[0] == '+')) ? 1 : 0;
    if (start == token.size()) {
        return false;
    }
    return std::all_of(token.begin() + static_cast<std::ptrdiff_t>(start), token.end(),
                       [](char c) { return c >= '0' && c <= '9'; });
}

bool is_number(const std::string& token)
{
    if (token.empty()) {
        return false;
    }
    std::size_t used = 0;
    try {
        (void)std::stod(token, &used);
    } catch (const std::exception&) {
        return false;
    }
    // stod accepts "inf"/"nan"; scripts may not
    const char c = token[token[0] == '-' || token[0] == '+' ? 1 : 0];
    return used == token.size() && (std::isdigit(static_cast<unsigned char>(c)) || c == '.');
}

long long to_integer(const std::string& token, std::size_t line)
{
    if (!is_integer(token)) {
        throw ParseError(line, "expected an integer, got '" + token + "'");
    }
    try {
        return std::stoll(token);
    } catch (const std::exception&) {
        throw ParseError(line, "integer out of range '" + token + "'");
    }
}

double to_number(const std::string& token, std::size_t line)
{
    if (!is_number(token)) {
        throw ParseError(line, "expected a number, got '" + token + "'");
    }
    return std::stod(token);
}

std::size_t edit_distance(const std::string& a, const std::string& b)
{
    std::vector<std::size_t> prev(b.size() + 1);
    std::vector<std::size_t> cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) {
        prev[j] = j;
    }
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::vector<std::string> near_matches(const std::string& name, const std::vector<std::string>& candidates,
                                      std::size_t limit)
{
    std::vector<std::pair<std::size_t, std::string>> scored;
    const std::size_t budget = std::max<std::size_t>(2, name.size() / 3);
    for (const auto& c : candidates) {
        const std::size_t d = edit_distance(name, c);
        const bool shares_base = !name.empty() && (c.rfind(name, 0) == 0 || name.rfind(c, 0) == 0);
        if (d <= budget || shares_base) {
            scored.emplace_back(d, c);
        }
    }
    std::sort(scored.begin(), scored.end());
    std::vector<std::string> out;
    for (std::size_t n = 0; n < scored.size() && n < limit; ++n) {
        out.push_back(scored[n].second);
    }
    return out;
}

namespace
{

using Args = std::vector<std::string>;

struct Rule
{
    bool persistent;
    std::function<void(const Args&, std::size_t)> check;
};

void arity(const std::string& name, const Args& a, std::size_t lo, std::size_t hi, std::size_t line)
{
    if (a.size() < lo || a.size() > hi) {
        std::string want = lo == hi ? std::to_string(lo) : std::to_string(lo) + "-" + std::to_string(hi);
        if (hi == static_cast<std::size_t>(-1)) {
            want = "at least " + std::to_string(lo);
        }
        throw ParseError(line, name + " expects " + want + " arguments, got " + std::to_string(a.size()));
    }
}

void one_of(const std::string& name, const std::string& token, std::initializer_list<const char*> allowed,
            std::size_t line)
{
    for (const char* s : allowed) {
        if (token == s) {
            return;
        }
    }
    std::string list;
    for (const char* s : allowed) {
        list += list.empty() ? s : std::string("|") + s;
    }
    throw ParseError(line, name + ": expected " + list + ", got '" + token + "'");
}

void positive(const std::string& name, const std::string& token, std::size_t line)
{
    if (!(to_number(token, line) > 0.0)) {
        throw ParseError(line, name + ": value must be positive, got '" + token + "'");
    }
}

void non_negative_int(const std::string& name, const std::string& token, std::size_t line)
{
    if (to_integer(token, line) < 0) {
        throw ParseError(line, name + ": value must be non-negative, got '" + token + "'");
    }
}

void positive_int(const std::string& name, const std::string& token, std::size_t line)
{
    if (to_integer(token, line) < 1) {
        throw ParseError(line, name + ": value must be at least 1, got '" + token + "'");
    }
}

void type_or_star(const std::string& token, std::size_t line)
{
    if (token != "*") {
        positive_int("pair_coeff", token, line);
    }
}

// keyword/value lists such as "cutoff 2.0 tol 1e-8". `arity` maps each keyword
// to the number of values it takes; values must be numbers unless listed in
// `words`.
void keywords(const std::string& name, const Args& a, std::size_t first, const std::map<std::string, std::size_t>& arity,
              const std::map<std::string, std::vector<std::string>>& words, std::size_t line)
{
    std::size_t n = first;
    while (n < a.size()) {
        const auto it = arity.find(a[n]);
        if (it == arity.end()) {
            throw ParseError(line, name + ": unknown keyword '" + a[n] + "'");
        }
        if (n + it->second >= a.size()) {
            throw ParseError(line, name + ": keyword '" + a[n] + "' needs " + std::to_string(it->second) + " values");
        }
        const auto w = words.find(a[n]);
        for (std::size_t v = 1; v <= it->second; ++v) {
            if (w != words.end()) {
                if (std::find(w->second.begin(), w->second.end(), a[n + v]) == w->second.end()) {
                    throw ParseError(line, name + ": bad value '" + a[n + v] + "' for " + a[n]);
                }
            } else {
                (void)to_number(a[n + v], line);
            }
        }
        n += it->second + 1;
    }
}

const std::map<std::string, Rule>& rules()
{
    static const std::size_t any = static_cast<std::size_t>(-1);
    static const std::map<std::string, Rule> table = {
        {"units",
         {true,
          [](const Args& a, std::size_t l) {
              arity("units", a, 1, 1, l);
              one_of("units", a[0], {"lj"}, l);
          }}},
        {"boundary",
         {true,
          [](const Args& a, std::size_t l) {
              arity("boundary", a, 3, 3, l);
              for (const auto& t : a) {
                  one_of("boundary", t, {"p", "f"}, l);
              }
          }}},
        {"lattice",
         {true,
          [](const Args& a, std::size_t l) {
              arity("lattice", a, 2, 2, l);
              one_of("lattice", a[0], {"fcc", "sc"}, l);
              positive("lattice", a[1], l);
          }}},
        {"create_box",
         {false,
          [](const Args& a, std::size_t l) {
              arity("create_box", a, 3, 3, l);
              for (const auto& t : a) {
                  positive_int("create_box", t, l);
              }
          }}},
        {"create_atoms",
         {false,
          [](const Args& a, std::size_t l) {
              arity("create_atoms", a, 0, 1, l);
              if (!a.empty()) {
                  positive_int("create_atoms", a[0], l);
              }
          }}},
        {"mass",
         {true,
          [](const Args& a, std::size_t l) {
              arity("mass", a, 2, 2, l);
              positive_int("mass", a[0], l);
              positive("mass", a[1], l);
          }}},
        {"velocity",
         {false,
          [](const Args& a, std::size_t l) {
              arity("velocity", a, 2, 2, l);
              if (to_number(a[0], l) < 0.0) {
                  throw ParseError(l, "velocity: temperature must be non-negative");
              }
              non_negative_int("velocity", a[1], l);
          }}},
        {"pair_style",
         {true,
          [](const Args& a, std::size_t l) {
              arity("pair_style", a, 1, any, l);
              for (std::size_t n = 1; n < a.size(); ++n) {
                  (void)to_number(a[n], l);
              }
          }}},
        {"pair_coeff",
         {true,
          [](const Args& a, std::size_t l) {
              arity("pair_coeff", a, 2, 5, l);
              type_or_star(a[0], l);
              type_or_star(a[1], l);
          }}},
        {"pair_modify",
         {true,
          [](const Args& a, std::size_t l) {
              arity("pair_modify", a, 2, 2, l);
              one_of("pair_modify", a[0], {"shift"}, l);
              one_of("pair_modify", a[1], {"yes", "no"}, l);
          }}},
        {"qeq",
         {true,
          [](const Args& a, std::size_t l) {
              arity("qeq", a, 1, any, l);
              one_of("qeq", a[0], {"on", "off"}, l);
              if (a[0] == "off") {
                  arity("qeq", a, 1, 1, l);
                  return;
              }
              keywords("qeq", a, 1, {{"cutoff", 1}, {"tol", 1}, {"maxiter", 1}, {"net", 1}, {"species", 4}}, {}, l);
          }}},
        {"torsion",
         {true,
          [](const Args& a, std::size_t l) {
              arity("torsion", a, 1, any, l);
              one_of("torsion", a[0], {"on", "off"}, l);
              if (a[0] == "off") {
                  arity("torsion", a, 1, 1, l);
                  return;
              }
              keywords("torsion", a, 1,
                       {{"r_bond", 1}, {"r0", 1}, {"p", 1}, {"bo_min", 1}, {"threshold", 1}, {"k_t", 1}, {"k_b", 1}},
                       {}, l);
          }}},
        {"suffix", {true, [](const Args& a, std::size_t l) { arity("suffix", a, 1, 1, l); }}},
        {"timestep",
         {true,
          [](const Args& a, std::size_t l) {
              arity("timestep", a, 1, 1, l);
              positive("timestep", a[0], l);
          }}},
        {"thermo",
         {true,
          [](const Args& a, std::size_t l) {
              arity("thermo", a, 1, 1, l);
              non_negative_int("thermo", a[0], l);
          }}},
        {"neighbor",
         {true,
          [](const Args& a, std::size_t l) {
              arity("neighbor", a, 1, 2, l);
              if (to_number(a[0], l) < 0.0) {
                  throw ParseError(l, "neighbor: skin must be non-negative");
              }
              if (a.size() == 2) {
                  one_of("neighbor", a[1], {"half", "full"}, l);
              }
          }}},
        {"newton",
         {true,
          [](const Args& a, std::size_t l) {
              arity("newton", a, 1, 1, l);
              one_of("newton", a[0], {"on", "off"}, l);
          }}},
        {"processors",
         {true,
          [](const Args& a, std::size_t l) {
              arity("processors", a, 1, 1, l);
              positive_int("processors", a[0], l);
          }}},
        {"accumulate",
         {true,
          [](const Args& a, std::size_t l) {
              arity("accumulate", a, 1, 1, l);
              try {
                  (void)parse_strategy(a[0]);
              } catch (const Error& e) {
                  throw ParseError(l, std::string("accumulate: ") + e.what());
              }
          }}},
        {"execution",
         {true,
          [](const Args& a, std::size_t l) {
              arity("execution", a, 1, 1, l);
              one_of("execution", a[0], {"atom", "neighbor"}, l);
          }}},
        {"snap_knobs",
         {true,
          [](const Args& a, std::size_t l) {
              arity("snap_knobs", a, 2, any, l);
              keywords("snap_knobs", a, 0,
                       {{"batch_u", 1}, {"batch_y", 1}, {"tile_v", 1}, {"layout", 1}, {"fused", 1}},
                       {{"layout", {"host", "device"}}, {"fused", {"yes", "no"}}}, l);
              for (std::size_t n = 0; n + 1 < a.size(); n += 2) {
                  if (a[n] == "batch_u" || a[n] == "batch_y") {
                      non_negative_int("snap_knobs", a[n + 1], l);
                  } else if (a[n] == "tile_v") {
                      positive_int("snap_knobs", a[n + 1], l);
                  }
              }
          }}},
        {"run",
         {false,
          [](const Args& a, std::size_t l) {
              arity("run", a, 1, 1, l);
              non_negative_int("run", a[0], l);
          }}},
        {"bench",
         {false,
          [](const Args& a, std::size_t l) {
              if (a.size() != 3 && a.size() != 5) {
                  throw ParseError(l, "bench expects <potential> <sizes> <reps> [out <file>]");
              }
              std::stringstream sizes(a[1]);
              std::string item;
              while (std::getline(sizes, item, ',')) {
                  positive_int("bench", item, l);
              }
              positive_int("bench", a[2], l);
              if (a.size() == 5) {
                  one_of("bench", a[3], {"out"}, l);
              }
          }}},
    };
    return table;
}

} // namespace

std::vector<std::string> known_commands()
{
    std::vector<std::string> names;
    for (const auto& [name, rule] : rules()) {
        names.push_back(name);
    }
    return names;
}

bool is_persistent(const std::string& command)
{
    const auto it = rules().find(command);
    if (it == rules().end()) {
        throw Error("unknown command '" + command + "'");
    }
    return it->second.persistent;
}

Script parse_script(const std::string& text)
{
    Script script;
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    std::string pending;
    std::size_t start_line = 0;

    auto flush = [&]() {
        std::istringstream words(pending);
        std::vector<std::string> tokens;
        std::string w;
        while (words >> w) {
            tokens.push_back(w);
        }
        pending.clear();
        if (tokens.empty()) {
            return;
        }
        Command cmd;
        cmd.name = tokens[0];
        cmd.args.assign(tokens.begin() + 1, tokens.end());
        cmd.line = start_line;
        const auto it = rules().find(cmd.name);
        if (it == rules().end()) {
            std::string msg = "unknown command '" + cmd.name + "'";
            const auto near = near_matches(cmd.name, known_commands());
            if (!near.empty()) {
                msg += " (did you mean";
                for (const auto& n : near) {
                    msg += " " + n;
                }
                msg += "?)";
            }
            throw ParseError(cmd.line, msg);
        }
        it->second.check(cmd.args, cmd.line);
        script.commands.push_back(std::move(cmd));
    };

    while (std::getline(in, raw)) {
        ++line_no;
        if (pending.empty()) {
            start_line = line_no;
        }
        std::string line = raw.substr(0, raw.find('#'));
        const auto last = line.find_last_not_of(" \t\r");
        line = last == std::string::npos ? std::string() : line.substr(0, last + 1);
        if (!line.empty() && line.back() == '&') {
            line.pop_back();
            pending += line + " ";
            continue;
        }
        pending += line;
        flush();
    }
    flush();
    return script;
}

std::string serialize(const Script& script)
{
    std::string out;
    for (const auto& cmd : script.commands) {
        std::vector<std::string> tokens{cmd.name};
        tokens.insert(tokens.end(), cmd.args.begin(), cmd.args.end());
        for (std::size_t n = 0; n < tokens.size(); ++n) {
            const auto& t = tokens[n];
            if (t.empty() || t.find_first_of(" \t\r\n#") != std::string::npos ||
                (n + 1 == tokens.size() && t.back() == '&')) {
                throw Error("serialize: token '" + t + "' cannot be written back");
            }
            out += n == 0 ? t : " " + t;
        }
        out += "\n";
    }
    return out;
}

} // namespace mdkk
