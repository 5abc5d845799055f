#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace hmlab {

enum class Relation { Less, LessEqual, Greater, GreaterEqual };

inline const char* relation_symbol(Relation r) {
    switch (r) {
        case Relation::Less: return "<";
        case Relation::LessEqual: return "<=";
        case Relation::Greater: return ">";
        case Relation::GreaterEqual: return ">=";
    }
    return "?";
}

// One verified statement: value compared against threshold.
struct Check {
    std::string name;
    std::string ref;
    double value = 0.0;
    double threshold = 0.0;
    Relation relation = Relation::Less;
    bool pass = false;
};

inline Check make_check(std::string name, std::string ref, double value, double threshold,
                        Relation rel = Relation::Less) {
    bool ok = false;
    if (std::isfinite(value) || std::isinf(value)) {
        switch (rel) {
            case Relation::Less: ok = value < threshold; break;
            case Relation::LessEqual: ok = value <= threshold; break;
            case Relation::Greater: ok = value > threshold; break;
            case Relation::GreaterEqual: ok = value >= threshold; break;
        }
    }
    return Check{std::move(name), std::move(ref), value, threshold, rel, ok};
}

inline bool all_pass(const std::vector<Check>& cs) {
    for (const auto& c : cs)
        if (!c.pass) return false;
    return true;
}

// Numeric table destined for CSV output.
struct Table {
    std::string name;
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

}  // namespace hmlab
