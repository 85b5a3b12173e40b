#pragma once
#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace mivs {

enum class Family { Gaussian, Binomial };
enum class WeightScheme { Equal, FractionObserved };
enum class StandardizeMode { Stacked, PerDataset };

using MaskMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/**
 * D imputed copies of an n x p design sharing one outcome vector.
 *
 * mask(i, j) is true where covariate j of subject i was missing before
 * imputation. Cells with mask false hold the same value in every copy.
 * Instances are immutable once created.
 */
class MultipleImputationSet
{
public:
    // Validates every invariant and throws InputError naming the first
    // offending subject or column.
    static MultipleImputationSet create(std::vector<Eigen::MatrixXd> imputations,
                                        Eigen::VectorXd outcome,
                                        MaskMatrix mask,
                                        std::vector<std::string> subject_ids = {},
                                        std::vector<std::string> covariate_names = {});

    int n() const { return static_cast<int>(outcome_.size()); }
    int p() const { return static_cast<int>(covariate_names_.size()); }
    int D() const { return static_cast<int>(imputations_.size()); }

    const Eigen::MatrixXd& X(int d) const { return imputations_[d]; }
    const std::vector<Eigen::MatrixXd>& imputations() const { return imputations_; }
    const Eigen::VectorXd& outcome() const { return outcome_; }
    const MaskMatrix& mask() const { return mask_; }
    const std::vector<std::string>& subject_ids() const { return subject_ids_; }
    const std::vector<std::string>& covariate_names() const { return covariate_names_; }

    // Binomial when every outcome is 0 or 1, gaussian otherwise.
    Family detect_family() const;

    // Throws InputError unless the outcome is coded {0,1}.
    void require_binary_outcome() const;

private:
    MultipleImputationSet() = default;

    std::vector<Eigen::MatrixXd> imputations_;
    Eigen::VectorXd outcome_;
    MaskMatrix mask_;
    std::vector<std::string> subject_ids_;
    std::vector<std::string> covariate_names_;
};

struct CsvLayout
{
    std::string imputation_column = "imputation_id";
    std::string subject_column = "subject_id";
    std::string outcome_column = "y";
    // Companion 0/1 file with a subject_id column plus one column per
    // covariate. When absent, a cell counts as missing iff its value differs
    // between imputations.
    std::optional<std::string> mask_path;
};

// Long-format reader: one row per (imputation, subject). Every column other
// than the three id/outcome columns is a covariate, in header order.
MultipleImputationSet load_csv(const std::string& path, const CsvLayout& layout = {});

struct ObservationWeights
{
    Eigen::VectorXd o; // one weight per subject
    WeightScheme scheme = WeightScheme::Equal;
};

// Equal: o_i = 1/D. Fraction-observed: o_i = f_i / D with f_i the share of
// covariates observed for subject i according to the mask.
ObservationWeights observation_weights(const MultipleImputationSet& set, WeightScheme scheme);

/**
 * Standardized copy of the imputed designs.
 *
 * Stacked mode pools all D copies: sum_d sum_i x = 0 and
 * (1/n) sum_d sum_i x^2 = 1 per column (divisor n, not nD). Per-dataset mode
 * centers and scales every copy separately with divisor n.
 * centers and scales are D x p; in stacked mode all rows are equal.
 */
struct StandardizedView
{
    StandardizeMode mode = StandardizeMode::Stacked;
    Eigen::MatrixXd centers;
    Eigen::MatrixXd scales;
    std::vector<Eigen::MatrixXd> X;

    int n() const { return X.empty() ? 0 : static_cast<int>(X.front().rows()); }
    int p() const { return X.empty() ? 0 : static_cast<int>(X.front().cols()); }
    int D() const { return static_cast<int>(X.size()); }
};

// Throws InputError naming the column when it has zero spread.
StandardizedView standardize(const std::vector<Eigen::MatrixXd>& imputations, StandardizeMode mode,
                             const std::vector<std::string>& names = {});
StandardizedView standardize(const MultipleImputationSet& set, StandardizeMode mode);

struct Coefficients
{
    double intercept = 0.0;
    Eigen::VectorXd beta;
};

// Maps coefficients fitted on the standardized design of imputation d back to
// raw covariate units so that linear predictors agree on both scales.
Coefficients back_transform(const Coefficients& standardized, const StandardizedView& view, int d = 0);

} // namespace mivs
