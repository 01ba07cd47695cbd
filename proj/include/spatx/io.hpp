#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "spatx/dataset.hpp"
#include "spatx/design.hpp"

namespace spatx {

struct CsvTable {
    std::string source;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    int column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text, const std::string& source);
std::string read_file(const std::string& path);

double parse_double(const std::string& text, const std::string& where);
long parse_int(const std::string& text, const std::string& where);
bool parse_bool(const std::string& text, const std::string& where);

// key = value lines; '#' starts a comment.  Getters record what was read,
// including defaults, so the manifest can list every effective setting.
class Config {
public:
    static Config load(const std::string& path);
    static Config parse(const std::string& text, const std::string& source);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::string get(const std::string& key, const std::string& fallback) const;
    std::string require(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    long get_int(const std::string& key, long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    const std::map<std::string, std::string>& values() const { return values_; }
    const std::map<std::string, std::string>& used() const { return used_; }
    std::string canonical() const;

private:
    std::map<std::string, std::string> values_;
    mutable std::map<std::string, std::string> used_;
};

std::uint64_t fnv1a(const std::string& bytes);
std::string hex64(std::uint64_t v);

// Regions are ordered by first appearance in the locations file.  Design keys:
// design (completely_randomized | bernoulli | independent | observational),
// treated_regions, pi, within (single | fixed_k), k, metric (euclidean | great_circle).
// observational: every location an independent trial with placeholder
// probability 0.5; estimators take propensities from the caller.
Study load_study(const std::string& individuals_path, const std::string& locations_path, const Config& config);

// Rows individual,location,value; location "-" holds Y_i(0), other rows tau_i(s).
// Individuals without a baseline row use their observed outcome.
SyntheticStudy load_synthetic(const Study& study, const std::string& potential_path, const Config& config);

void write_individuals(std::ostream& os, const Study& study);
void write_locations(std::ostream& os, const Study& study);
void write_locations(std::ostream& os, const std::vector<Location>& points, const std::string& region);
void write_potential(std::ostream& os, const SyntheticStudy& synthetic);

struct Manifest {
    std::string command;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> inputs;   // path, hash
    std::vector<std::pair<std::string, std::string>> outputs;  // name, hash
    void write(std::ostream& os, const Config& effective) const;
};

std::string version_string();

}  // namespace spatx
