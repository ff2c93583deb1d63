#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace heavysgd {

enum class Budget { quick, standard, full };
Budget budget_from_string(const std::string& name);  // quick | default | full
std::string to_string(Budget budget);

struct LemmaRow {
    std::string name;
    bool pass = false;
    std::string summary;
    nlohmann::ordered_json detail;
};

struct LemmaSuite {
    Budget budget = Budget::standard;
    std::vector<LemmaRow> rows;
    bool all_pass() const;
};

/// The deterministic-recursion and inequality oracle suite: vector expansion
/// sweep, p-expansion Monte Carlo, the 27-point Fabian grid, the rho-exp and
/// phi-sum limits with the diagonal cross-check.
LemmaSuite run_lemma_suite(Budget budget, std::uint64_t seed = 1);

}  // namespace heavysgd
