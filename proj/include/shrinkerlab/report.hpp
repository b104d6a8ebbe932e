#pragma once

#include <json.hpp>
#include <map>
#include <string>
#include <vector>

#include "shrinkerlab/common.hpp"

namespace shrinkerlab::harness {

// One verified inequality or identity. `anchor` is the stable identifier
// the report schema publishes for cross-referencing checks between runs.
struct CheckReport {
    std::string id;
    std::string anchor;
    std::string model;
    std::string inputs_digest;
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;
    std::map<std::string, double> constants;  // empirical, non-asserted
    std::string status;                       // pass | fail | recorded
    std::string note;
    double runtime_ms = 0.0;
};

struct Report {
    std::string schema_version = "1";
    std::uint64_t seed = 0;
    std::string config_digest;
    std::string generated_at;  // excluded from the digest
    std::vector<CheckReport> checks;

    int passes() const;
    int failures() const;
    int recorded() const;

    nlohmann::json to_json() const;
    std::string digest() const;  // SHA-256 over the canonical form
};

// canonical serialization: sorted keys, %.12e floats, timing fields removed
std::string canonical_json(const nlohmann::json& j);
std::string sha256_hex(const std::string& bytes);

// published schema for the report document
const char* report_schema_text();

// minimal structural validation against the published schema; throws Error
// with a field diagnostic on the first violation
void validate_report(const nlohmann::json& report);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace shrinkerlab::harness
