#pragma once

#include <functional>
#include <string>
#include <vector>

#include "spatx/dataset.hpp"
#include "spatx/io.hpp"
#include "spatx/oracle.hpp"

namespace fixtures {

std::string dir();
std::string path(const std::string& fixture, const std::string& file);

spatx::Config config(const std::string& name);
spatx::Study study(const std::string& name);
spatx::SyntheticStudy synthetic(const std::string& name);

// Rows of a frozen oracle table keyed by column values.
class Frozen {
public:
    explicit Frozen(const std::string& file);
    // First row whose named columns hold the given strings.
    std::vector<std::string> row(const std::vector<std::pair<std::string, std::string>>& keys) const;
    double value(const std::vector<std::pair<std::string, std::string>>& keys, const std::string& column) const;
    const spatx::CsvTable& table() const { return table_; }

private:
    spatx::CsvTable table_;
};

// Fixture names by family, as written by the oracle generator.
std::vector<std::string> family_names();
std::vector<std::string> conservative_names();
bool is_bernoulli(const std::string& name);

// Defined-value moments computed independently of spatx::exact_moments: a plain
// loop over the library's enumeration with two-pass accumulation.
struct Plain {
    double mean = 0.0, variance = 0.0, excluded = 0.0;
};
Plain plain_moments(const spatx::SyntheticStudy& syn, const spatx::Estimator& est);

// Study with the same individuals and locations under a different design.
spatx::SyntheticStudy with_design(const spatx::SyntheticStudy& syn, const spatx::Design& design);

// Global site indices to region slots, sorted.
std::vector<int> slots_of(const spatx::Study& st, const std::vector<int>& sites);

}  // namespace fixtures
