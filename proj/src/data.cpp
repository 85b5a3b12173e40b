#include <mivs/csv.hpp>
#include <mivs/data.hpp>
#include <mivs/error.hpp>

#include <cmath>
#include <unordered_map>

namespace mivs {

MultipleImputationSet MultipleImputationSet::create(std::vector<Eigen::MatrixXd> imputations,
                                                    Eigen::VectorXd outcome,
                                                    MaskMatrix mask,
                                                    std::vector<std::string> subject_ids,
                                                    std::vector<std::string> covariate_names)
{
    if (imputations.empty()) throw InputError("at least one imputation is required");
    const auto n = outcome.size();
    const auto p = imputations.front().cols();
    if (n < 2) throw InputError("at least two subjects are required");
    if (p < 1) throw InputError("at least one covariate is required");
    for (std::size_t d = 0; d < imputations.size(); ++d) {
        if (imputations[d].rows() != n || imputations[d].cols() != p) {
            throw InputError("imputation " + std::to_string(d) + " has shape " +
                             std::to_string(imputations[d].rows()) + "x" +
                             std::to_string(imputations[d].cols()) + ", expected " +
                             std::to_string(n) + "x" + std::to_string(p));
        }
        if (!imputations[d].allFinite()) {
            throw InputError("imputation " + std::to_string(d) + " contains non-finite values");
        }
    }
    if (!outcome.allFinite()) throw InputError("outcome contains non-finite values");
    if (mask.size() == 0) mask = MaskMatrix::Constant(n, p, false);
    if (mask.rows() != n || mask.cols() != p) throw InputError("mask shape does not match the design");

    if (subject_ids.empty()) {
        for (Eigen::Index i = 0; i < n; ++i) subject_ids.push_back(std::to_string(i));
    }
    if (static_cast<Eigen::Index>(subject_ids.size()) != n) throw InputError("subject id count does not match n");
    if (covariate_names.empty()) {
        for (Eigen::Index j = 0; j < p; ++j) covariate_names.push_back("x" + std::to_string(j + 1));
    }
    if (static_cast<Eigen::Index>(covariate_names.size()) != p) {
        throw InputError("covariate name count does not match p");
    }

    const auto& first = imputations.front();
    for (std::size_t d = 1; d < imputations.size(); ++d) {
        for (Eigen::Index j = 0; j < p; ++j) {
            for (Eigen::Index i = 0; i < n; ++i) {
                if (!mask(i, j) && imputations[d](i, j) != first(i, j)) {
                    throw InputError("subject " + subject_ids[i] + ": observed value of " +
                                     covariate_names[j] + " differs across imputations");
                }
            }
        }
    }

    MultipleImputationSet set;
    set.imputations_ = std::move(imputations);
    set.outcome_ = std::move(outcome);
    set.mask_ = std::move(mask);
    set.subject_ids_ = std::move(subject_ids);
    set.covariate_names_ = std::move(covariate_names);
    return set;
}

Family MultipleImputationSet::detect_family() const
{
    for (Eigen::Index i = 0; i < outcome_.size(); ++i) {
        if (outcome_[i] != 0.0 && outcome_[i] != 1.0) return Family::Gaussian;
    }
    return Family::Binomial;
}

void MultipleImputationSet::require_binary_outcome() const
{
    for (Eigen::Index i = 0; i < outcome_.size(); ++i) {
        if (outcome_[i] != 0.0 && outcome_[i] != 1.0) {
            throw InputError("subject " + subject_ids_[i] + ": binary outcome must be coded 0/1, found " +
                             csv::format(outcome_[i]));
        }
    }
}

namespace {

MaskMatrix read_mask(const std::string& path,
                     const std::string& subject_column,
                     const std::unordered_map<std::string, int>& subject_index,
                     const std::vector<std::string>& names)
{
    auto table = csv::read(path);
    const int sid = table.column(subject_column);
    if (sid < 0) throw InputError(path + ": missing column '" + subject_column + "'");
    std::vector<int> cols;
    for (const auto& name : names) {
        int c = table.column(name);
        if (c < 0) throw InputError(path + ": missing mask column for covariate '" + name + "'");
        cols.push_back(c);
    }
    const auto n = static_cast<Eigen::Index>(subject_index.size());
    MaskMatrix mask = MaskMatrix::Constant(n, static_cast<Eigen::Index>(names.size()), false);
    std::vector<bool> seen(n, false);
    for (const auto& row : table.rows) {
        auto it = subject_index.find(row[sid]);
        if (it == subject_index.end()) throw InputError(path + ": unknown subject " + row[sid]);
        if (seen[it->second]) throw InputError(path + ": subject " + row[sid] + " listed twice");
        seen[it->second] = true;
        for (std::size_t j = 0; j < cols.size(); ++j) {
            const auto& f = row[cols[j]];
            if (f != "0" && f != "1") {
                throw InputError(path + ": subject " + row[sid] + ": mask entries must be 0 or 1");
            }
            mask(it->second, static_cast<Eigen::Index>(j)) = (f == "1");
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!seen[i]) throw InputError(path + ": no mask row for a subject present in the data");
    }
    return mask;
}

} // namespace

MultipleImputationSet load_csv(const std::string& path, const CsvLayout& layout)
{
    auto table = csv::read(path);
    const int imp_col = table.column(layout.imputation_column);
    const int sub_col = table.column(layout.subject_column);
    const int y_col = table.column(layout.outcome_column);
    if (imp_col < 0) throw InputError(path + ": missing column '" + layout.imputation_column + "'");
    if (sub_col < 0) throw InputError(path + ": missing column '" + layout.subject_column + "'");
    if (y_col < 0) throw InputError(path + ": missing column '" + layout.outcome_column + "'");

    std::vector<int> x_cols;
    std::vector<std::string> names;
    for (int c = 0; c < static_cast<int>(table.header.size()); ++c) {
        if (c == imp_col || c == sub_col || c == y_col) continue;
        x_cols.push_back(c);
        names.push_back(table.header[c]);
    }
    if (x_cols.empty()) throw InputError(path + ": no covariate columns");

    // First-appearance order for both imputations and subjects.
    std::unordered_map<std::string, int> imp_index, sub_index;
    std::vector<std::string> subjects;
    for (const auto& row : table.rows) {
        imp_index.try_emplace(row[imp_col], static_cast<int>(imp_index.size()));
        if (sub_index.try_emplace(row[sub_col], static_cast<int>(sub_index.size())).second) {
            subjects.push_back(row[sub_col]);
        }
    }
    const int D = static_cast<int>(imp_index.size());
    const int n = static_cast<int>(sub_index.size());
    const int p = static_cast<int>(x_cols.size());

    std::vector<Eigen::MatrixXd> X(D, Eigen::MatrixXd::Zero(n, p));
    Eigen::VectorXd y(n);
    std::vector<std::vector<bool>> seen(D, std::vector<bool>(n, false));
    std::vector<bool> y_set(n, false);
    std::size_t line = 1;
    for (const auto& row : table.rows) {
        ++line;
        const std::string ctx = path + ": row " + std::to_string(line);
        const int d = imp_index.at(row[imp_col]);
        const int i = sub_index.at(row[sub_col]);
        if (seen[d][i]) {
            throw InputError(path + ": subject " + row[sub_col] + " appears twice in imputation " + row[imp_col]);
        }
        seen[d][i] = true;
        const double yi = csv::to_double(row[y_col], ctx);
        if (!y_set[i]) {
            y[i] = yi;
            y_set[i] = true;
        } else if (y[i] != yi) {
            throw InputError(path + ": subject " + row[sub_col] + ": outcome differs across imputations");
        }
        for (int j = 0; j < p; ++j) X[d](i, j) = csv::to_double(row[x_cols[j]], ctx);
    }
    for (const auto& [imp, d] : imp_index) {
        for (int i = 0; i < n; ++i) {
            if (!seen[d][i]) {
                throw InputError(path + ": subject " + subjects[i] + " missing from imputation " + imp);
            }
        }
    }

    MaskMatrix mask;
    if (layout.mask_path) {
        mask = read_mask(*layout.mask_path, layout.subject_column, sub_index, names);
    } else {
        mask = MaskMatrix::Constant(n, p, false);
        for (int d = 1; d < D; ++d) mask = mask || (X[d].array() != X[0].array());
    }
    return MultipleImputationSet::create(std::move(X), std::move(y), std::move(mask), std::move(subjects),
                                         std::move(names));
}

ObservationWeights observation_weights(const MultipleImputationSet& set, WeightScheme scheme)
{
    ObservationWeights w;
    w.scheme = scheme;
    const double D = set.D();
    if (scheme == WeightScheme::Equal) {
        w.o = Eigen::VectorXd::Constant(set.n(), 1.0 / D);
        return w;
    }
    w.o.resize(set.n());
    const double p = set.p();
    for (int i = 0; i < set.n(); ++i) {
        const double missing = static_cast<double>(set.mask().row(i).count());
        w.o[i] = ((p - missing) / p) / D;
    }
    return w;
}

StandardizedView standardize(const std::vector<Eigen::MatrixXd>& imputations, StandardizeMode mode,
                             const std::vector<std::string>& names)
{
    const int D = static_cast<int>(imputations.size());
    const auto n = imputations.front().rows();
    const auto p = imputations.front().cols();
    auto column_name = [&](Eigen::Index j) {
        return j < static_cast<Eigen::Index>(names.size()) ? names[j] : "x" + std::to_string(j + 1);
    };

    StandardizedView view;
    view.mode = mode;
    view.centers.resize(D, p);
    view.scales.resize(D, p);
    view.X = imputations;
    const double nd = static_cast<double>(n);

    for (Eigen::Index j = 0; j < p; ++j) {
        if (mode == StandardizeMode::Stacked) {
            double sum = 0.0;
            for (const auto& Xd : imputations) sum += Xd.col(j).sum();
            const double center = sum / (nd * D);
            double ss = 0.0;
            for (const auto& Xd : imputations) ss += (Xd.col(j).array() - center).square().sum();
            const double scale = std::sqrt(ss / nd);
            if (!(scale > 0.0)) throw InputError("covariate " + column_name(j) + " is constant");
            view.centers.col(j).setConstant(center);
            view.scales.col(j).setConstant(scale);
        } else {
            for (int d = 0; d < D; ++d) {
                const double center = imputations[d].col(j).mean();
                const double scale = std::sqrt((imputations[d].col(j).array() - center).square().sum() / nd);
                if (!(scale > 0.0)) {
                    throw InputError("covariate " + column_name(j) + " is constant in imputation " +
                                     std::to_string(d + 1));
                }
                view.centers(d, j) = center;
                view.scales(d, j) = scale;
            }
        }
        for (int d = 0; d < D; ++d) {
            view.X[d].col(j) = (imputations[d].col(j).array() - view.centers(d, j)) / view.scales(d, j);
        }
    }
    return view;
}

StandardizedView standardize(const MultipleImputationSet& set, StandardizeMode mode)
{
    return standardize(set.imputations(), mode, set.covariate_names());
}

Coefficients back_transform(const Coefficients& standardized, const StandardizedView& view, int d)
{
    Coefficients out;
    out.beta = standardized.beta.array() / view.scales.row(d).transpose().array();
    out.intercept = standardized.intercept - out.beta.dot(view.centers.row(d).transpose());
    return out;
}

} // namespace mivs
