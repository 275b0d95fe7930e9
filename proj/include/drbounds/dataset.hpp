#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace drbounds {

// Immutable-by-convention tabular sample: outcome y, binary treatment t and
// an n x d covariate block with unique column labels. Use make_dataset() or
// load_csv() so the invariants are checked once up front.
struct Dataset {
    Eigen::VectorXd outcome;
    Eigen::VectorXi treatment;
    Eigen::MatrixXd covariates;
    std::vector<std::string> names;
    std::string outcome_name = "y";
    std::string treatment_name = "t";
    std::vector<std::string> warnings; // e.g. constant covariate columns

    int n() const { return static_cast<int>(outcome.size()); }
    int d() const { return static_cast<int>(covariates.cols()); }
};

Dataset make_dataset(Eigen::VectorXd outcome, Eigen::VectorXi treatment,
                     Eigen::MatrixXd covariates, std::vector<std::string> names,
                     std::string outcome_name = "y", std::string treatment_name = "t");

// CSV ingestion: header required, comma separator, decimal point, all columns
// numeric. Covariates are every column except the named outcome/treatment,
// kept in file order.
Dataset load_csv(const std::string& path, const std::string& outcome_col,
                 const std::string& treatment_col);

// Writes header + rows with shortest round-trip number formatting, so
// load_csv(write_csv(ds)) reproduces ds bit-exactly.
void write_csv(const Dataset& ds, const std::string& path);

// Copy with the listed covariate columns removed (empty set = identity).
Dataset subset_covariates(const Dataset& ds, const std::set<int>& excluded);

struct FoldAssignment {
    std::vector<int> fold_of;
    int K = 0;
    std::uint64_t seed = 0;
};

// Balanced random partition into K folds, a pure function of (n, K, seed).
FoldAssignment split_folds(int n, int K, std::uint64_t seed);

std::string fold_assignment_to_json(const FoldAssignment& fa);
FoldAssignment fold_assignment_from_json(const std::string& text);

} // namespace drbounds
