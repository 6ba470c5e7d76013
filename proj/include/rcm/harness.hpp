#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rcm/environment.hpp"
#include "rcm/trapstat.hpp"

namespace rcm {

struct ExperimentConfig {
    BoxSpec box;
    std::optional<LawSpec> law;
    std::optional<TrapSpec> trap;  // planted on top of the sampled base
    std::string envFile;           // explicit environment overrides law/trap
    double alpha = 0.5;
    std::string kind = "verify-all";
    std::int64_t nMax = 8;
    std::int64_t theta = 4;
    std::int64_t r = 1;
    std::int64_t delta = 4;
    std::int64_t mcBudget = 10000;
    std::uint64_t masterSeed = 1;
    std::string outDir = "rcm-out";
    bool overrideHorizon = false;
    int threads = 1;

    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    Environment make_environment() const;
    void validate() const;
};

struct CheckResult {
    std::string name;
    bool pass = false;
    double measured = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

struct VerifyReport {
    std::vector<CheckResult> checks;
    bool pass = true;

    void add(CheckResult c) {
        pass = pass && c.pass;
        checks.push_back(std::move(c));
    }
    nlohmann::json to_json() const;
};

// Runs, in order: kernel identities, diagonal heat-kernel monotonicity,
// coarse reversibility, the sojourn inner-product identity, the spectral
// bounds, greedy/brute-force G-membership, the product-sum implication, and
// the phi-transform properties.
VerifyReport verify_suite(const ExperimentConfig& config);

// Writes config.json, report.json and experiment CSVs under config.outDir.
// Returns the process exit code (0 pass, 1 check failure).
int run_experiment(const ExperimentConfig& config);

// CSV with 17-significant-digit decimals; metadata (including timestamps)
// lives in `# ` comment lines so bodies are byte-identical across runs.
class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::vector<std::string>& columns,
              const nlohmann::json& configEcho);
    void comment(const std::string& line);
    void row(const std::vector<double>& values);
    void row_raw(const std::vector<std::string>& cells);
    ~CsvWriter();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::string format_significant(double v);  // %.17g

// Deterministic replica-parallel map: fn(replica, stream) runs with a stream
// derived from (masterSeed, replica); scheduling cannot change any result.
void run_replicas(std::int64_t total, int threads, std::uint64_t masterSeed,
                  const std::function<void(std::int64_t, RngStream&)>& fn);

}  // namespace rcm
