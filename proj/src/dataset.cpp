#include "drbounds/dataset.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace drbounds {

namespace {

void check_unique(const std::vector<std::string>& names) {
    std::unordered_set<std::string> seen;
    for (const auto& nm : names)
        if (!seen.insert(nm).second)
            throw std::invalid_argument("duplicate covariate name: " + nm);
}

double parse_cell(const std::string& cell, int row, const std::string& col) {
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    // tolerate surrounding spaces
    while (first < last && (*first == ' ' || *first == '\t')) ++first;
    while (last > first && (*(last - 1) == ' ' || *(last - 1) == '\t' || *(last - 1) == '\r')) --last;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || first == last)
        throw std::invalid_argument("non-numeric cell at data row " + std::to_string(row) +
                                    ", column '" + col + "': '" + cell + "'");
    if (!std::isfinite(value))
        throw std::invalid_argument("non-finite cell at data row " + std::to_string(row) +
                                    ", column '" + col + "'");
    return value;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

std::string format_number(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::runtime_error("number formatting failed");
    return std::string(buf, ptr);
}

} // namespace

Dataset make_dataset(Eigen::VectorXd outcome, Eigen::VectorXi treatment,
                     Eigen::MatrixXd covariates, std::vector<std::string> names,
                     std::string outcome_name, std::string treatment_name) {
    const auto n = outcome.size();
    if (n < 2) throw std::invalid_argument("n < 2");
    if (treatment.size() != n || covariates.rows() != n)
        throw std::invalid_argument("outcome/treatment/covariates row counts disagree");
    if (static_cast<Eigen::Index>(names.size()) != covariates.cols())
        throw std::invalid_argument("covariate name count does not match column count");
    check_unique(names);
    if (!outcome.allFinite() || !covariates.allFinite())
        throw std::invalid_argument("non-finite entries in dataset");
    bool has0 = false, has1 = false;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (treatment(i) == 0) has0 = true;
        else if (treatment(i) == 1) has1 = true;
        else throw std::invalid_argument("treatment not binary");
    }
    (void)has0;
    (void)has1; // single-arm datasets are legal to hold; estimators enforce arm presence
    Dataset ds;
    ds.outcome = std::move(outcome);
    ds.treatment = std::move(treatment);
    ds.covariates = std::move(covariates);
    ds.names = std::move(names);
    ds.outcome_name = std::move(outcome_name);
    ds.treatment_name = std::move(treatment_name);
    for (int j = 0; j < ds.d(); ++j) {
        const auto col = ds.covariates.col(j);
        if ((col.array() == col(0)).all())
            ds.warnings.push_back("covariate '" + ds.names[j] + "' is constant");
    }
    return ds;
}

Dataset load_csv(const std::string& path, const std::string& outcome_col,
                 const std::string& treatment_col) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("empty file: " + path);
    const auto header = split_line(line);
    check_unique(header);
    int y_idx = -1, t_idx = -1;
    for (int j = 0; j < static_cast<int>(header.size()); ++j) {
        if (header[j] == outcome_col) y_idx = j;
        if (header[j] == treatment_col) t_idx = j;
    }
    if (y_idx < 0) throw std::invalid_argument("missing outcome column '" + outcome_col + "'");
    if (t_idx < 0) throw std::invalid_argument("missing treatment column '" + treatment_col + "'");
    if (y_idx == t_idx) throw std::invalid_argument("outcome and treatment columns coincide");

    std::vector<std::vector<double>> rows;
    int row_no = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        ++row_no;
        const auto cells = split_line(line);
        if (cells.size() != header.size())
            throw std::invalid_argument("row " + std::to_string(row_no) + " has " +
                                        std::to_string(cells.size()) + " cells, expected " +
                                        std::to_string(header.size()));
        std::vector<double> parsed(cells.size());
        for (std::size_t j = 0; j < cells.size(); ++j)
            parsed[j] = parse_cell(cells[j], row_no, header[j]);
        rows.push_back(std::move(parsed));
    }
    const int n = static_cast<int>(rows.size());
    if (n < 2) throw std::invalid_argument("n < 2");
    const int d = static_cast<int>(header.size()) - 2;
    Eigen::VectorXd y(n);
    Eigen::VectorXi t(n);
    Eigen::MatrixXd X(n, d);
    std::vector<std::string> names;
    names.reserve(d);
    for (int j = 0; j < static_cast<int>(header.size()); ++j)
        if (j != y_idx && j != t_idx) names.push_back(header[j]);
    for (int i = 0; i < n; ++i) {
        y(i) = rows[i][y_idx];
        const double tv = rows[i][t_idx];
        if (tv != 0.0 && tv != 1.0) throw std::invalid_argument("treatment not binary");
        t(i) = static_cast<int>(tv);
        int jj = 0;
        for (int j = 0; j < static_cast<int>(header.size()); ++j)
            if (j != y_idx && j != t_idx) X(i, jj++) = rows[i][j];
    }
    return make_dataset(std::move(y), std::move(t), std::move(X), std::move(names),
                        outcome_col, treatment_col);
}

void write_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out << ds.outcome_name << ',' << ds.treatment_name;
    for (const auto& nm : ds.names) out << ',' << nm;
    out << '\n';
    for (int i = 0; i < ds.n(); ++i) {
        out << format_number(ds.outcome(i)) << ',' << ds.treatment(i);
        for (int j = 0; j < ds.d(); ++j) out << ',' << format_number(ds.covariates(i, j));
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

Dataset subset_covariates(const Dataset& ds, const std::set<int>& excluded) {
    for (int j : excluded)
        if (j < 0 || j >= ds.d())
            throw std::invalid_argument("covariate index out of range: " + std::to_string(j));
    std::vector<int> keep;
    for (int j = 0; j < ds.d(); ++j)
        if (!excluded.count(j)) keep.push_back(j);
    Eigen::MatrixXd X(ds.n(), static_cast<int>(keep.size()));
    std::vector<std::string> names;
    names.reserve(keep.size());
    for (std::size_t jj = 0; jj < keep.size(); ++jj) {
        X.col(static_cast<int>(jj)) = ds.covariates.col(keep[jj]);
        names.push_back(ds.names[keep[jj]]);
    }
    Dataset out;
    out.outcome = ds.outcome;
    out.treatment = ds.treatment;
    out.covariates = std::move(X);
    out.names = std::move(names);
    out.outcome_name = ds.outcome_name;
    out.treatment_name = ds.treatment_name;
    return out;
}

FoldAssignment split_folds(int n, int K, std::uint64_t seed) {
    if (K < 2) throw std::invalid_argument("K < 2");
    if (K > n) throw std::invalid_argument("K > n");
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    FoldAssignment fa;
    fa.fold_of.assign(n, 0);
    fa.K = K;
    fa.seed = seed;
    for (int i = 0; i < n; ++i) fa.fold_of[perm[i]] = i % K;
    return fa;
}

std::string fold_assignment_to_json(const FoldAssignment& fa) {
    nlohmann::json j;
    j["seed"] = fa.seed;
    j["K"] = fa.K;
    j["fold_of"] = fa.fold_of;
    return j.dump();
}

FoldAssignment fold_assignment_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    FoldAssignment fa;
    fa.seed = j.at("seed").get<std::uint64_t>();
    fa.K = j.at("K").get<int>();
    fa.fold_of = j.at("fold_of").get<std::vector<int>>();
    return fa;
}

} // namespace drbounds
