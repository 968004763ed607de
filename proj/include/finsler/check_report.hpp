#pragma once

#include "finsler/types.hpp"

#include <map>
#include <string>

namespace finsler {

/// Outcome of one identity, inequality or bound verification.
/// pass == (worst_violation <= threshold) always.
struct CheckReport {
    std::string name;
    long sample_count = 0;
    double worst_violation = 0.0;
    Vec worst_location;
    double threshold = 0.0;
    bool pass = true;
    std::map<std::string, std::string> metadata;
    std::map<std::string, double> values;

    void finalize() { pass = worst_violation <= threshold; }

    /// Keeps the larger violation; ties go to the earlier sample.
    void record(double violation, const Vec& where)
    {
        if (sample_count == 0 || violation > worst_violation) {
            worst_violation = violation;
            worst_location = where;
        }
        ++sample_count;
    }
};

} // namespace finsler
